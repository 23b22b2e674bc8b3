#include "sizer/netlist.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "sizer/kv.hpp"
#include "sizer/types.hpp"

namespace sizer {

namespace {

struct DecimalParts {
  std::string mantissa;  // digits with optional sign, dot and e-exponent
  int suffix_exp = 0;
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

DecimalParts split_eng(std::string_view token) {
  const auto fail = [&]() -> DecimalParts {
    throw Error(ErrorCode::malformed_number, fmt::format("malformed number '{}'", token));
  };
  std::size_t i = 0;
  if (i < token.size() && (token[i] == '+' || token[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < token.size() && is_digit(token[i])) { ++i; ++digits; }
  if (i < token.size() && token[i] == '.') {
    ++i;
    while (i < token.size() && is_digit(token[i])) { ++i; ++digits; }
  }
  if (digits == 0) return fail();
  if (i + 1 < token.size() && (token[i] == 'e' || token[i] == 'E')) {
    std::size_t j = i + 1;
    if (token[j] == '+' || token[j] == '-') ++j;
    if (j < token.size() && is_digit(token[j])) {
      while (j < token.size() && is_digit(token[j])) ++j;
      i = j;
    }
  }
  DecimalParts parts;
  parts.mantissa = std::string(token.substr(0, i));
  const auto rest = token.substr(i);
  for (char c : rest) {
    if (!is_alpha(c)) return fail();
  }
  if (rest.empty()) return parts;
  const auto low = kv::to_lower(rest);
  if (low.rfind("meg", 0) == 0) {
    parts.suffix_exp = 6;
    return parts;
  }
  switch (low[0]) {
    case 't': parts.suffix_exp = 12; break;
    case 'g': parts.suffix_exp = 9; break;
    case 'k': parts.suffix_exp = 3; break;
    case 'm': parts.suffix_exp = -3; break;
    case 'u': parts.suffix_exp = -6; break;
    case 'n': parts.suffix_exp = -9; break;
    case 'p': parts.suffix_exp = -12; break;
    case 'f': parts.suffix_exp = -15; break;
    default: break;  // bare unit such as V or F
  }
  return parts;
}

double decimal_value(const DecimalParts& parts, int extra_exp, std::string_view token) {
  // Fold the suffix into the decimal exponent so strtod rounds exactly once.
  std::string mant = parts.mantissa;
  int exp10 = parts.suffix_exp + extra_exp;
  if (const auto e = mant.find_first_of("eE"); e != std::string::npos) {
    exp10 += std::atoi(mant.c_str() + e + 1);
    mant.resize(e);
  }
  const auto text = fmt::format("{}e{}", mant, exp10);
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::malformed_number, fmt::format("malformed number '{}'", token));
  }
  return v;
}

struct Token {
  std::string_view text;
  std::size_t pos = 0;
};

std::vector<Token> tokenize(std::string_view line) {
  if (const auto semi = line.find(';'); semi != std::string_view::npos) {
    line = line.substr(0, semi);
  }
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const auto start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back({line.substr(start, i - start), start});
  }
  return out;
}

enum class CardKind { other, device, capacitor };

CardKind card_kind(const std::vector<Token>& toks) {
  if (toks.empty()) return CardKind::other;
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(toks[0].text[0])));
  if (c == 'M') return CardKind::device;
  if (c == 'C') return CardKind::capacitor;
  return CardKind::other;
}

int parse_multiplier(std::string_view text, std::string_view name) {
  int m = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), m);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::malformed_number,
                fmt::format("{}: multiplier '{}' is not an integer", name, text));
  }
  return m;
}

DeviceCard parse_device(const std::vector<Token>& toks, std::size_t line_index) {
  DeviceCard dev;
  dev.name = std::string(toks[0].text);
  dev.line_index = line_index;
  if (toks.size() < 6) {
    throw Error(ErrorCode::missing_field,
                fmt::format("line {}: device {} needs 4 nodes and a model", line_index + 1,
                            dev.name));
  }
  dev.model = std::string(toks[5].text);
  bool have_w = false, have_l = false;
  for (std::size_t k = 6; k < toks.size(); ++k) {
    const auto tok = toks[k].text;
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = kv::to_lower(tok.substr(0, eq));
    const auto val = tok.substr(eq + 1);
    const TokenSpan span{toks[k].pos + eq + 1, val.size()};
    if (key == "w") {
      dev.w = EngNumber::parse(val);
      dev.w_span = span;
      have_w = true;
    } else if (key == "l") {
      dev.l = EngNumber::parse(val);
      dev.l_span = span;
      have_l = true;
    } else if (key == "m") {
      dev.m = parse_multiplier(val, dev.name);
      dev.m_span = span;
    }
  }
  if (!have_w || !have_l) {
    throw Error(ErrorCode::missing_field,
                fmt::format("line {}: device {} is missing {}", line_index + 1, dev.name,
                            have_w ? "L" : "W"));
  }
  return dev;
}

CapacitorCard parse_capacitor(const std::vector<Token>& toks, std::size_t line_index) {
  CapacitorCard cap;
  cap.name = std::string(toks[0].text);
  cap.line_index = line_index;
  if (toks.size() < 4) {
    throw Error(ErrorCode::missing_field,
                fmt::format("line {}: capacitor {} has no value", line_index + 1, cap.name));
  }
  cap.value = EngNumber::parse(toks[3].text);
  cap.value_span = {toks[3].pos, toks[3].text.size()};
  return cap;
}

void index_line(NetlistDoc& doc, std::size_t idx, bool allow_existing) {
  const auto toks = tokenize(doc.lines[idx]);
  const auto kind = card_kind(toks);
  if (kind == CardKind::other) return;
  const auto key = kv::to_upper(toks[0].text);
  if (!allow_existing && (doc.devices.count(key) || doc.capacitors.count(key))) {
    throw Error(ErrorCode::duplicate_name,
                fmt::format("line {}: duplicate element name '{}'", idx + 1, toks[0].text));
  }
  if (kind == CardKind::device) {
    doc.devices.insert_or_assign(key, parse_device(toks, idx));
  } else {
    doc.capacitors.insert_or_assign(key, parse_capacitor(toks, idx));
  }
}

std::string known_names(const NetlistDoc& doc) {
  std::string out;
  for (const auto& [k, _] : doc.devices) out += (out.empty() ? "" : ", ") + k;
  for (const auto& [k, _] : doc.capacitors) out += (out.empty() ? "" : ", ") + k;
  return out;
}

void replace_span(std::string& line, const TokenSpan& span, std::string_view text) {
  line.replace(span.pos, span.len, text);
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

double parse_eng(std::string_view token) {
  return decimal_value(split_eng(token), 0, token);
}

EngNumber EngNumber::parse(std::string_view token) {
  return EngNumber{parse_eng(token), std::string(token)};
}

EngNumber EngNumber::from_value(double v) { return EngNumber{v, format_eng(v)}; }

double EngNumber::in_unit(int unit_exp) const {
  return decimal_value(split_eng(rendered), -unit_exp, rendered);
}

std::string format_eng(double value) {
  if (value == 0.0) return "0";
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::malformed_number, "cannot render a non-finite value");
  }
  char buf[64];
  const auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), std::abs(value), std::chars_format::scientific);
  const std::string_view sci(buf, static_cast<std::size_t>(ptr - buf));
  const auto e = sci.find('e');
  std::string digits;
  for (char c : sci.substr(0, e)) {
    if (c != '.') digits += c;
  }
  const int exp10 = std::atoi(std::string(sci.substr(e + 1)).c_str());

  static constexpr std::pair<int, const char*> kSuffixes[] = {
      {12, "t"}, {9, "g"},  {6, "meg"}, {3, "k"},   {0, ""},
      {-3, "m"}, {-6, "u"}, {-9, "n"},  {-12, "p"}, {-15, "f"}};
  int sfx_exp = -15;
  const char* sfx = "f";
  for (const auto& [ex, name] : kSuffixes) {
    if (ex <= exp10) {
      sfx_exp = ex;
      sfx = name;
      break;
    }
  }
  const int int_digits = exp10 - sfx_exp + 1;
  std::string mant;
  if (int_digits <= 0) {
    mant = "0." + std::string(static_cast<std::size_t>(-int_digits), '0') + digits;
  } else if (static_cast<std::size_t>(int_digits) >= digits.size()) {
    mant = digits + std::string(static_cast<std::size_t>(int_digits) - digits.size(), '0');
  } else {
    mant = digits.substr(0, static_cast<std::size_t>(int_digits)) + "." +
           digits.substr(static_cast<std::size_t>(int_digits));
  }
  return (value < 0 ? "-" : "") + mant + sfx;
}

std::string format_um(double um) { return shortest(um) + "u"; }

ParamPatch ParamPatch::w(std::string target, std::string_view token) {
  return {std::move(target), ParamField::W, EngNumber::parse(token)};
}
ParamPatch ParamPatch::l(std::string target, std::string_view token) {
  return {std::move(target), ParamField::L, EngNumber::parse(token)};
}
ParamPatch ParamPatch::m(std::string target, int count) {
  return {std::move(target), ParamField::M,
          EngNumber{static_cast<double>(count), std::to_string(count)}};
}
ParamPatch ParamPatch::cap(std::string target, std::string_view token) {
  return {std::move(target), ParamField::VALUE, EngNumber::parse(token)};
}

std::string_view to_string(ParamField field) {
  switch (field) {
    case ParamField::W: return "W";
    case ParamField::L: return "L";
    case ParamField::M: return "m";
    case ParamField::VALUE: return "VALUE";
  }
  return "?";
}

std::string NetlistDoc::text() const {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += lines[i];
    if (i + 1 < lines.size() || trailing_newline) out += '\n';
  }
  return out;
}

NetlistDoc parse_netlist(std::string_view text) {
  NetlistDoc doc;
  doc.trailing_newline = !text.empty() && text.back() == '\n';
  while (!text.empty()) {
    const auto nl = text.find('\n');
    doc.lines.emplace_back(text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  for (std::size_t i = 0; i < doc.lines.size(); ++i) index_line(doc, i, false);
  return doc;
}

NetlistDoc apply_patches(const NetlistDoc& doc, const std::vector<ParamPatch>& patches) {
  NetlistDoc out = doc;
  for (const auto& p : patches) {
    const auto key = kv::to_upper(p.target);
    if (auto it = out.devices.find(key); it != out.devices.end()) {
      auto& dev = it->second;
      auto& line = out.lines[dev.line_index];
      switch (p.field) {
        case ParamField::W:
        case ParamField::L:
          if (!(p.value.value > 0.0)) {
            throw Error(ErrorCode::illegal_field,
                        fmt::format("{}.{} must be positive", p.target, to_string(p.field)));
          }
          replace_span(line, p.field == ParamField::W ? dev.w_span : dev.l_span,
                       p.value.rendered);
          break;
        case ParamField::M: {
          const double v = p.value.value;
          if (!(v >= 1.0) || v != std::floor(v)) {
            throw Error(ErrorCode::illegal_field,
                        fmt::format("{}.m must be an integer >= 1, got {}", p.target,
                                    p.value.rendered));
          }
          const auto text = std::to_string(static_cast<int>(v));
          if (dev.m_span) {
            replace_span(line, *dev.m_span, text);
          } else {
            const auto toks = tokenize(line);
            const auto end = toks.back().pos + toks.back().text.size();
            line.insert(end, " m=" + text);
          }
          break;
        }
        case ParamField::VALUE:
          throw Error(ErrorCode::illegal_field,
                      fmt::format("{} is a transistor; VALUE applies to capacitors", p.target));
      }
      index_line(out, dev.line_index, true);
    } else if (auto ct = out.capacitors.find(key); ct != out.capacitors.end()) {
      if (p.field != ParamField::VALUE) {
        throw Error(ErrorCode::illegal_field,
                    fmt::format("{} is a capacitor; field {} does not apply", p.target,
                                to_string(p.field)));
      }
      if (!(p.value.value > 0.0)) {
        throw Error(ErrorCode::illegal_field,
                    fmt::format("{} value must be positive", p.target));
      }
      auto& cap = ct->second;
      replace_span(out.lines[cap.line_index], cap.value_span, p.value.rendered);
      index_line(out, cap.line_index, true);
    } else {
      throw Error(ErrorCode::unknown_target,
                  fmt::format("unknown element '{}'; known: {}", p.target, known_names(out)));
    }
  }
  return out;
}

double CircuitParams::gate_area_um2() const {
  double area = 0.0;
  for (const auto& d : dev) area += d.w * d.l * d.m;
  return area;
}

CircuitParams extract_params(const NetlistDoc& doc, const NameMap& names) {
  CircuitParams p;
  for (std::size_t i = 0; i < kNumRoles; ++i) {
    const auto it = doc.devices.find(kv::to_upper(names.devices[i]));
    if (it == doc.devices.end()) {
      throw Error(ErrorCode::missing_device,
                  fmt::format("netlist has no device '{}' (role M{})", names.devices[i], i + 1));
    }
    p.dev[i] = DeviceGeom{it->second.w.in_unit(-6), it->second.l.in_unit(-6), it->second.m};
  }
  const auto c1 = doc.capacitors.find(kv::to_upper(names.c1));
  if (c1 == doc.capacitors.end()) {
    throw Error(ErrorCode::missing_device,
                fmt::format("netlist has no capacitor '{}' (role C1)", names.c1));
  }
  p.c1 = c1->second.value.value;
  const auto cl = doc.capacitors.find(kv::to_upper(names.cl));
  p.cl = cl == doc.capacitors.end() ? names.default_cl : cl->second.value.value;
  return p;
}

std::vector<ParamPatch> diff_params(const CircuitParams& from, const CircuitParams& to,
                                    const NameMap& names) {
  std::vector<ParamPatch> out;
  if (from.c1 != to.c1) out.push_back(ParamPatch::cap(names.c1, format_eng(to.c1)));
  for (std::size_t i = 0; i < kNumRoles; ++i) {
    const auto& a = from.dev[i];
    const auto& b = to.dev[i];
    if (a.w != b.w) out.push_back(ParamPatch::w(names.devices[i], format_um(b.w)));
    if (a.l != b.l) out.push_back(ParamPatch::l(names.devices[i], format_um(b.l)));
    if (a.m != b.m) out.push_back(ParamPatch::m(names.devices[i], b.m));
  }
  return out;
}

std::vector<ParamPatch> restate_params(const CircuitParams& params, const NameMap& names) {
  std::vector<ParamPatch> out;
  out.push_back(ParamPatch::cap(names.c1, format_eng(params.c1)));
  for (std::size_t i = 0; i < kNumRoles; ++i) {
    const auto& d = params.dev[i];
    out.push_back(ParamPatch::w(names.devices[i], format_um(d.w)));
    out.push_back(ParamPatch::l(names.devices[i], format_um(d.l)));
    out.push_back(ParamPatch::m(names.devices[i], d.m));
  }
  return out;
}

std::string synthesize_netlist(const CircuitParams& p) {
  const auto dev = [&p](int n, std::string_view nodes, std::string_view model) {
    const auto& d = p.M(n);
    return fmt::format("M{} {} {} W={} L={} m={}\n", n, nodes, model, format_um(d.w),
                       format_um(d.l), d.m);
  };
  std::string out;
  out += "* two-stage Miller-compensated op-amp\n";
  out += "VDD vdd 0 1.8\n";
  out += "VINP inp 0 DC 0.9 AC 1 PULSE(0.85 0.95 20n 1n 1n 1u 2u)\n";
  out += "VINN inn 0 DC 0.9\n";
  out += "IREF vdd nbias 10u\n";
  out += "M8 nbias nbias 0 0 nfet W=2u L=1u m=1\n";
  out += dev(1, "x1 inn tail 0", "nfet");
  out += dev(2, "x2 inp tail 0", "nfet");
  out += dev(3, "x1 x1 vdd vdd", "pfet");
  out += dev(4, "x2 x1 vdd vdd", "pfet");
  out += dev(5, "tail nbias 0 0", "nfet");
  out += dev(6, "out nbias 0 0", "nfet");
  out += dev(7, "out x2 vdd vdd", "pfet");
  out += fmt::format("C1 x2 out {}\n", format_eng(p.c1));
  out += fmt::format("CL out 0 {}\n", format_eng(p.cl));
  out += ".end\n";
  return out;
}

}  // namespace sizer
