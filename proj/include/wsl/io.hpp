#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wsl/version.hpp"

// Plain-text artifacts: CSV for columnar data, JSON for structured reports,
// and a run manifest that records enough to reproduce every output file
// bit-identically.

namespace wsl {

/// Shortest decimal string that parses back to the exact same double.
inline std::string format_double(double v)
{
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (res.ec != std::errc())
        throw std::runtime_error("format_double: conversion failed");
    return std::string(buf.data(), res.ptr);
}

/// FNV-1a, 64-bit.
inline std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// FNV-1a digest as 16 hex digits.
inline std::string digest_hex(std::string_view content)
{
    static const char* hex = "0123456789abcdef";
    std::uint64_t h = fnv1a64(content);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4)
        out[i] = hex[h & 0xf];
    return out;
}

inline void write_text_file(const std::string& path, std::string_view content)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for writing: " + path);
    f.write(content.data(), std::streamsize(content.size()));
    if (!f)
        throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for reading: " + path);
    std::string out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return out;
}

/// Accumulates a CSV document; every cell is rendered at full round-trip
/// precision. Newlines are '\n' regardless of platform.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> columns) : n_cols_(columns.size())
    {
        if (columns.empty())
            throw std::logic_error("CsvWriter: need at least one column");
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i)
                buf_ += ',';
            append_cell(columns[i]);
        }
        buf_ += '\n';
    }

    template <class... Ts>
    void row(const Ts&... cells)
    {
        if (sizeof...(cells) != n_cols_)
            throw std::logic_error("CsvWriter: row arity does not match the header");
        std::size_t i = 0;
        ((append_sep(i++), append_cell(cells)), ...);
        buf_ += '\n';
    }

    const std::string& str() const { return buf_; }

private:
    void append_sep(std::size_t i)
    {
        if (i)
            buf_ += ',';
    }
    void append_cell(double v) { buf_ += format_double(v); }
    void append_cell(int v) { buf_ += std::to_string(v); }
    void append_cell(long v) { buf_ += std::to_string(v); }
    void append_cell(unsigned long v) { buf_ += std::to_string(v); }
    void append_cell(std::string_view s)
    {
        if (s.find_first_of(",\"\n\r") != std::string_view::npos)
            throw std::logic_error("CsvWriter: cell would need quoting");
        buf_ += s;
    }
    void append_cell(const std::string& s) { append_cell(std::string_view(s)); }
    void append_cell(const char* s) { append_cell(std::string_view(s)); }

    std::string buf_;
    std::size_t n_cols_;
};

/// Record of one command run: the fully resolved configuration (reusable as
/// a config file), tool version, wall-clock duration, and a content digest
/// for every output file written.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    double duration_seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
    nlohmann::json summary;

    void add_output(const std::string& path, std::string_view content)
    {
        outputs.emplace_back(path, digest_hex(content));
    }

    nlohmann::json to_json() const
    {
        nlohmann::json j;
        j["tool"] = "wsl";
        j["version"] = std::string(version_string);
        j["command"] = command;
        j["config"] = config;
        j["duration_seconds"] = duration_seconds;
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [path, digest] : outputs)
            out[path] = digest;
        j["outputs"] = out;
        if (!summary.is_null())
            j["summary"] = summary;
        return j;
    }

    void write(const std::string& path) const
    {
        write_text_file(path, to_json().dump(2) + "\n");
    }
};

}
