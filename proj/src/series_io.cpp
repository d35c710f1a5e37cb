#include "elliptorus/series_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace elliptorus {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  // from_chars rejects a leading '+'
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError("cannot parse number '" + std::string(s) + "'");
  return v;
}

namespace detail {

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<int> parse_ints(const std::string& field) {
  std::istringstream ss(field);
  std::vector<int> v;
  std::string tok;
  while (ss >> tok) {
    int x = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) throw IoError("cannot parse integer '" + tok + "'");
    v.push_back(x);
  }
  return v;
}

}  // namespace detail

namespace {

void write_ints(std::ostream& os, const std::vector<int>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
}

}  // namespace

void write_series(std::ostream& os, const Series& g) {
  const auto& d = g.dims();
  os << "dims " << d.n1 << ' ' << d.n2 << '\n';
  for (const auto& t : g.terms()) {
    write_ints(os, t.key.m_vec(d));
    os << " | ";
    write_ints(os, t.key.l_vec(d));
    os << " | ";
    write_ints(os, t.key.lbar_vec(d));
    os << " | ";
    write_ints(os, t.key.k_vec(d));
    os << " | " << format_double(t.coeff.real()) << ' ' << format_double(t.coeff.imag()) << '\n';
  }
}

Series read_series(std::istream& is) {
  std::string line;
  bool have_dims = false;
  Dimensions dims;
  std::vector<Term> terms;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(detail::strip_comment(line));
    if (line.empty()) continue;
    try {
      if (!have_dims) {
        std::istringstream ss(line);
        std::string tag;
        int n1 = 0, n2 = 0;
        if (!(ss >> tag >> n1 >> n2) || tag != "dims") throw IoError("expected 'dims n1 n2' header");
        dims = Dimensions(n1, n2);
        have_dims = true;
        continue;
      }
      auto f = detail::split_fields(line, '|');
      if (f.size() != 5) throw IoError("expected 5 '|'-separated fields");
      auto c = detail::split_fields(f[4], ' ');
      std::erase_if(c, [](const std::string& s) { return s.empty(); });
      if (c.size() != 2) throw IoError("expected 're im' coefficient");
      auto key = MonomialKey::make(dims, detail::parse_ints(f[0]), detail::parse_ints(f[1]), detail::parse_ints(f[2]),
                                   detail::parse_ints(f[3]));
      terms.push_back({key, Complex(parse_double(c[0]), parse_double(c[1]))});
    } catch (const DimensionError& e) {
      throw IoError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const IoError& e) {
      throw IoError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_dims) throw IoError("missing 'dims' header");
  return Series::from_terms(dims, std::move(terms));
}

std::string series_to_string(const Series& g) {
  std::ostringstream os;
  write_series(os, g);
  return os.str();
}

Series series_from_string(const std::string& text) {
  std::istringstream is(text);
  return read_series(is);
}

void save_series(const std::string& path, const Series& g) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_series(os, g);
  if (!os) throw IoError("write failed: " + path);
}

Series load_series(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  return read_series(is);
}

}  // namespace elliptorus
