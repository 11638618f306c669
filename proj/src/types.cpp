#include "groupsim/types.hpp"

#include <stdexcept>

namespace groupsim {

std::string format_rational(const Rational& r) {
    return std::to_string(r.num) + "/" + std::to_string(r.den);
}

std::string rational_to_decimal(std::uint64_t num, std::uint64_t den, int places) {
    if (den == 0) {
        throw std::invalid_argument("rational_to_decimal: zero denominator");
    }
    std::string out = std::to_string(num / den);
    if (places <= 0) {
        return out;
    }
    out += '.';
    std::uint64_t rem = num % den;
    for (int i = 0; i < places; ++i) {
        rem *= 10;
        std::uint64_t digit = rem / den;
        rem %= den;
        // round-half-up on the final digit
        if (i == places - 1 && rem * 2 >= den) {
            ++digit;
            if (digit == 10) {
                // carry back through the digits we already emitted
                digit = 0;
                int pos = static_cast<int>(out.size()) - 1;
                while (pos >= 0) {
                    if (out[pos] == '.') {
                        --pos;
                        continue;
                    }
                    if (out[pos] != '9') {
                        ++out[pos];
                        break;
                    }
                    out[pos] = '0';
                    --pos;
                }
                if (pos < 0) {
                    out.insert(out.begin(), '1');
                }
            }
        }
        out += static_cast<char>('0' + digit);
    }
    return out;
}

} // namespace groupsim
