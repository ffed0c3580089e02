#pragma once

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "hessian_lab/errors.hpp"

namespace hessian_lab {

/// Shortest round-trip decimal; CSV cells never depend on locale.
inline std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

struct CsvCell {
    std::string text;
    CsvCell(double v) : text(format_double(v)) {}
    CsvCell(int v) : text(std::to_string(v)) {}
    CsvCell(long v) : text(std::to_string(v)) {}
    CsvCell(unsigned long v) : text(std::to_string(v)) {}
    CsvCell(unsigned long long v) : text(std::to_string(v)) {}
    CsvCell(long long v) : text(std::to_string(v)) {}
    CsvCell(bool v) : text(v ? "true" : "false") {}
    CsvCell(std::string v) : text(std::move(v)) {}
    CsvCell(const char* v) : text(v) {}
};

/// RFC 4180: CRLF records, header row, fields quoted when they hold a comma,
/// quote, CR or LF, with embedded quotes doubled.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<CsvCell> row)
    {
        if (row.size() != header_.size())
            throw ArgumentError(detail::concat("csv row has ", row.size(), " fields, header has ", header_.size()));
        std::vector<std::string> r;
        r.reserve(row.size());
        for (auto& c : row) r.push_back(std::move(c.text));
        rows_.push_back(std::move(r));
    }

    std::size_t rows() const { return rows_.size(); }

    static std::string quote(const std::string& s)
    {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + '"';
    }

    std::string str() const
    {
        std::string out;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) out += ',';
                out += quote(r[i]);
            }
            out += "\r\n";
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    void write(const std::filesystem::path& path) const
    {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw ArgumentError("cannot write " + path.string());
        os << str();
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

inline std::string hex_digest(const unsigned char* d, std::size_t n)
{
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        s += hex[d[i] >> 4];
        s += hex[d[i] & 15];
    }
    return s;
}

/// Same digest as `git hash-object`: sha1("blob <len>\0" + content).
inline std::string git_blob_hash(const std::string& content)
{
    std::string data = "blob " + std::to_string(content.size());
    data += '\0';
    data += content;
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr)) throw Error("sha1 digest failed");
    return hex_digest(md, len);
}

inline std::string read_bytes(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArgumentError("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

struct ExperimentResult {
    std::string name;
    bool pass = false;
    std::vector<std::string> csv;  // file names relative to the output directory
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

struct RunReport {
    std::string command;
    nlohmann::ordered_json config;
    /// git blob hash per input plus one hash over the sorted listing
    nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
    std::string input_hash;
    std::uint64_t seed = 0;
    int threads = 1;
    std::vector<ExperimentResult> results;
    nlohmann::ordered_json timings = nlohmann::ordered_json::object();
    std::vector<std::string> warnings;

    bool pass() const
    {
        for (const auto& r : results)
            if (!r.pass) return false;
        return true;
    }

    /// listing lines are "<hash> <name>\n" sorted by name, hashed as one more blob
    void hash_inputs(const std::vector<std::pair<std::string, std::string>>& named_contents)
    {
        std::vector<std::pair<std::string, std::string>> rows;
        for (const auto& [name, content] : named_contents) rows.emplace_back(name, git_blob_hash(content));
        std::sort(rows.begin(), rows.end());
        std::string listing;
        inputs = nlohmann::ordered_json::object();
        for (const auto& [name, h] : rows) {
            inputs[name] = h;
            listing += h + " " + name + "\n";
        }
        input_hash = git_blob_hash(listing);
    }

    nlohmann::ordered_json to_json() const
    {
        nlohmann::ordered_json j;
        j["command"] = command;
        j["config"] = config;
        j["inputs"] = inputs;
        j["input_hash"] = input_hash;
        j["rng"] = "mt19937_64";
        j["seed"] = seed;
        j["threads"] = threads;
        auto arr = nlohmann::ordered_json::array();
        for (const auto& r : results) {
            nlohmann::ordered_json e;
            e["name"] = r.name;
            e["pass"] = r.pass;
            e["csv"] = r.csv;
            e["summary"] = r.summary;
            arr.push_back(std::move(e));
        }
        j["results"] = std::move(arr);
        j["timings"] = timings;
        j["warnings"] = warnings;
        j["pass"] = pass();
        return j;
    }

    /// Drops CSV references whose file is missing so the report names only real files.
    void write(const std::filesystem::path& dir)
    {
        for (auto& r : results)
            std::erase_if(r.csv, [&](const std::string& f) { return !std::filesystem::exists(dir / f); });
        std::ofstream os(dir / "report.json", std::ios::binary);
        if (!os) throw ArgumentError("cannot write " + (dir / "report.json").string());
        os << to_json().dump(2) << "\n";
    }
};

}  // namespace hessian_lab
