#pragma once

#include <gmpxx.h>

#include <stdexcept>
#include <string>
#include <string_view>

namespace lop {

using Rational = mpq_class;

// Always "a/b" in lowest terms, including integers ("1/1", "0/1").
inline std::string to_string(const Rational& q) {
    Rational c = q;
    c.canonicalize();
    return c.get_num().get_str() + "/" + c.get_den().get_str();
}

// Accepts "a/b", "a" or a finite decimal like "0.25".
inline Rational parse_rational(std::string_view text) {
    std::string s(text);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
    size_t b = 0;
    while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
    s = s.substr(b);
    if (s.empty()) throw std::invalid_argument("empty rational");
    auto dot = s.find('.');
    Rational q;
    try {
        if (dot != std::string::npos) {
            std::string digits = s.substr(0, dot) + s.substr(dot + 1);
            if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
                throw std::invalid_argument("bad decimal");
            mpz_class num(digits);
            mpz_class den = 1;
            for (size_t i = dot + 1; i < s.size(); ++i) den *= 10;
            q = Rational(num, den);
        } else {
            if (s.find_first_not_of("0123456789/-") != std::string::npos)
                throw std::invalid_argument("bad rational");
            q = Rational(s);
        }
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("malformed rational '" + s + "'");
    }
    if (q.get_den() == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
    q.canonicalize();
    return q;
}

// Closed interval [lower, upper] of probabilities.
struct ProbInterval {
    Rational lower = 0;
    Rational upper = 1;

    bool disjoint_from(const ProbInterval& o) const { return upper < o.lower || o.upper < lower; }
    bool contains(const Rational& q) const { return lower <= q && q <= upper; }
    Rational width() const { return upper - lower; }
};

inline std::string to_string(const ProbInterval& i) {
    return "[" + to_string(i.lower) + ", " + to_string(i.upper) + "]";
}

}  // namespace lop
