#include "sfcmc/keyvalue.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>

#include "sfcmc/errors.hpp"

namespace sfcmc {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::istream& in) {
    KeyValueFile file;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        auto sep = view.find_first_of("=:");
        if (sep == std::string_view::npos)
            throw ParameterDomainError("line " + std::to_string(line_no) + ": expected 'key = value'");
        auto key = std::string(trim(view.substr(0, sep)));
        auto value = std::string(trim(view.substr(sep + 1)));
        if (key.empty()) throw ParameterDomainError("line " + std::to_string(line_no) + ": empty key");
        if (!file.entries_.emplace(key, value).second)
            throw ParameterDomainError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return file;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterDomainError("cannot open '" + path + "'");
    return parse(in);
}

bool KeyValueFile::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

const std::string& KeyValueFile::text(std::string_view key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ParameterDomainError("missing key '" + std::string(key) + "'");
    return it->second;
}

double KeyValueFile::number(std::string_view key) const {
    try {
        return parse_double(text(key));
    } catch (const ParameterDomainError& e) {
        throw ParameterDomainError("key '" + std::string(key) + "': " + e.what());
    }
}

double KeyValueFile::number_or(std::string_view key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
        throw ParameterDomainError("not a number: '" + std::string(text) + "'");
    return value;
}

}  // namespace sfcmc
