#pragma once

// Atomic units everywhere inside the library: hbar = m_e = e = 1/(4 pi eps0) = 1.
// Energies are hartree, lengths bohr, fields hartree/(e*bohr). The constants
// below exist only for I/O at the boundary (laboratory field strengths, eV).

namespace wsl::units {

inline constexpr double hartree_in_ev = 27.211386;

// 1 a.u. of electric field in V/cm.
inline constexpr double field_au_in_v_per_cm = 5.142207e9;

inline constexpr double hartree_to_ev(double e_hartree) { return e_hartree * hartree_in_ev; }

inline constexpr double field_from_kv_per_cm(double f_kv_cm)
{
    return f_kv_cm * 1e3 / field_au_in_v_per_cm;
}

inline constexpr double field_to_kv_per_cm(double f_au)
{
    return f_au * field_au_in_v_per_cm / 1e3;
}

}
