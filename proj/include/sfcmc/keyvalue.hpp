#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

namespace sfcmc {

// Flat "key = value" text: one pair per line, '#' starts a comment, ':' is
// accepted in place of '='. Duplicate keys are rejected.
class KeyValueFile {
public:
    static KeyValueFile parse(std::istream& in);
    static KeyValueFile load(const std::string& path);

    bool has(std::string_view key) const;
    const std::string& text(std::string_view key) const;
    double number(std::string_view key) const;
    double number_or(std::string_view key, double fallback) const;

    const std::map<std::string, std::string, std::less<>>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, std::string, std::less<>> entries_;
};

// Shortest representation that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

}  // namespace sfcmc
