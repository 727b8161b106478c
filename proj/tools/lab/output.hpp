#pragma once

#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include <json.hpp>

namespace lab
{

using json = nlohmann::ordered_json;

/// Writes to a sibling temporary file and renames it over the target.
inline void write_atomic(const std::filesystem::path &path, const std::string &content)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out << content;
        out.flush();
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw std::runtime_error("cannot rename " + tmp.string() + ": " + ec.message());
    }
}

inline void write_json(const std::filesystem::path &path, const json &j)
{
    write_atomic(path, j.dump(2) + "\n");
}

/// Round-trip decimal form, 17 significant digits.
inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline json to_json(std::complex<double> c) { return json::array({c.real(), c.imag()}); }

template <class Range> json to_json_list(const Range &r)
{
    json out = json::array();
    for (const auto &c : r) {
        out.push_back(to_json(c));
    }
    return out;
}

} // namespace lab
