#pragma once

// Plain-text serialization. Scalars are written with shortest round-trip
// decimals so write -> read -> write is byte-identical.

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "scglue/fields.hpp"

namespace scglue {

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("fmt: to_chars failed");
    return std::string(buf, p);
}

inline double parse_double(std::string_view sv, const char* what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec != std::errc() || p != sv.data() + sv.size())
        throw std::runtime_error(std::string("parse error: bad float for ") + what);
    return v;
}

inline long parse_int(std::string_view sv, const char* what) {
    long v = 0;
    auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec != std::errc() || p != sv.data() + sv.size())
        throw std::runtime_error(std::string("parse error: bad int for ") + what);
    return v;
}

inline std::map<std::string, std::string> parse_kv(std::istringstream& iss) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (iss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("parse error: expected key=value, got '" + tok + "'");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

inline std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        out.push_back(parse_double(std::string_view(s).substr(pos, comma - pos), what));
        pos = comma + 1;
    }
    return out;
}

inline const std::string& require(const std::map<std::string, std::string>& kv,
                                  const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("parse error: missing header key " + key);
    return it->second;
}

}  // namespace detail

using AnyField = std::variant<HalfCylinderField, FiniteCylinderField, AntiGluedField>;

namespace detail {

template <typename Field>
inline void write_rows(std::ostream& os, const Field& f) {
    for (int i = 0; i < f.ns; ++i)
        for (int j = 0; j < f.nt; ++j) {
            os << fmt(f.s_at(i)) << ' ' << fmt(f.t_at(j));
            for (int k = 0; k < f.ncomp; ++k) os << ' ' << fmt(f.at(i, j, k));
            os << '\n';
        }
}

inline std::string fmt_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += fmt(v[i]);
    }
    return s;
}

template <typename Field>
inline std::vector<double> read_rows(std::istream& is, int ns, int nt, int ncomp) {
    std::vector<double> data(static_cast<std::size_t>(ns) * nt * ncomp);
    std::string line, tok;
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j) {
            if (!std::getline(is, line))
                throw std::runtime_error("parse error: truncated sample block");
            std::istringstream row(line);
            if (!(row >> tok)) throw std::runtime_error("parse error: empty sample row");
            parse_double(tok, "s");  // redundant coordinate, grid is implied
            row >> tok;
            parse_double(tok, "t");
            for (int k = 0; k < ncomp; ++k) {
                if (!(row >> tok)) throw std::runtime_error("parse error: short sample row");
                data[(static_cast<std::size_t>(i) * nt + j) * ncomp + k] =
                    parse_double(tok, "sample");
            }
        }
    return data;
}

}  // namespace detail

inline void write_field(std::ostream& os, const HalfCylinderField& f) {
    os << "SCFIELD kind=half sign=" << (f.sign > 0 ? '+' : '-') << " N=" << f.ncomp
       << " Nt=" << f.nt << " Ns=" << f.ns << " Smax=" << detail::fmt(f.smax)
       << " theta=0 c=" << detail::fmt_list(f.c) << '\n';
    detail::write_rows(os, f);
}

inline void write_field(std::ostream& os, const FiniteCylinderField& f) {
    os << "SCFIELD kind=finite sign=+ N=" << f.ncomp << " Nt=" << f.nt << " Ns=" << f.ns
       << " R=" << detail::fmt(f.R()) << " theta=" << detail::fmt(f.param.theta)
       << " c=" << '\n';
    detail::write_rows(os, f);
}

inline void write_field(std::ostream& os, const AntiGluedField& f) {
    os << "SCFIELD kind=anti sign=+ N=" << f.ncomp << " Nt=" << f.nt << " Ns=" << f.ns
       << " R=" << detail::fmt(f.R()) << " theta=" << detail::fmt(f.param.theta)
       << " c=" << detail::fmt_list(f.c) << '\n';
    detail::write_rows(os, f);
}

inline void write_field(std::ostream& os, const AnyField& f) {
    std::visit([&](const auto& x) { write_field(os, x); }, f);
}

inline AnyField read_field(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw std::runtime_error("parse error: empty field file");
    std::istringstream iss(header);
    std::string magic;
    iss >> magic;
    if (magic != "SCFIELD") throw std::runtime_error("parse error: expected SCFIELD header");
    auto kv = detail::parse_kv(iss);
    const std::string kind = detail::require(kv, "kind");
    const int ncomp = static_cast<int>(detail::parse_int(detail::require(kv, "N"), "N"));
    const int nt = static_cast<int>(detail::parse_int(detail::require(kv, "Nt"), "Nt"));
    const int ns = static_cast<int>(detail::parse_int(detail::require(kv, "Ns"), "Ns"));
    if (kind == "half") {
        const std::string sgn = detail::require(kv, "sign");
        const double smax = detail::parse_double(detail::require(kv, "Smax"), "Smax");
        auto c = detail::parse_list(detail::require(kv, "c"), "c");
        auto data = detail::read_rows<HalfCylinderField>(is, ns, nt, ncomp);
        return HalfCylinderField(sgn == "-" ? -1 : +1, ncomp, ns, nt, smax, std::move(c),
                                 std::move(data), WeightSequence{}, /*warn_tail=*/false);
    }
    const double R = detail::parse_double(detail::require(kv, "R"), "R");
    const double theta = detail::parse_double(detail::require(kv, "theta"), "theta");
    auto param = GluingParameter::from_R(R, theta);
    if (kind == "finite") {
        auto data = detail::read_rows<FiniteCylinderField>(is, ns, nt, ncomp);
        return FiniteCylinderField(param, ncomp, ns, nt, std::move(data));
    }
    if (kind == "anti") {
        auto c = detail::parse_list(detail::require(kv, "c"), "c");
        auto data = detail::read_rows<AntiGluedField>(is, ns, nt, ncomp);
        return AntiGluedField(param, ncomp, ns, nt, std::move(c), std::move(data));
    }
    throw std::runtime_error("parse error: unknown field kind '" + kind + "'");
}

inline AnyField read_field_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read_field(is);
}

inline void write_field_file(const std::string& path, const AnyField& f) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write_field(os, f);
}

template <typename Field>
inline std::string field_to_string(const Field& f) {
    std::ostringstream os;
    write_field(os, f);
    return os.str();
}

}  // namespace scglue
