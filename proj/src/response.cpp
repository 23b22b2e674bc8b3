#include <charconv>
#include <regex>

#include <fmt/format.h>

#include "sizer/kv.hpp"
#include "sizer/strategy.hpp"

namespace sizer {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

bool is_fence(std::string_view line) { return kv::trim(line).starts_with("```"); }

enum class Section { none, observation, thinking, action };

const std::regex& header_re() {
  static const std::regex re(
      R"(^[\s#>*_-]*(?:\d+[.)]\s*)?[*_]*\s*(observation|thinking process|thinking|action)[*_]*\s*(?::|$)[*_]*\s*(.*)$)",
      std::regex::icase);
  return re;
}

std::optional<std::pair<Section, std::string>> match_header(std::string_view line) {
  std::cmatch m;
  if (!std::regex_match(line.data(), line.data() + line.size(), m, header_re())) return std::nullopt;
  const auto key = kv::to_lower(m[1].str());
  const Section s = key == "observation" ? Section::observation
                    : key == "action"    ? Section::action
                                         : Section::thinking;
  return std::make_pair(s, m[2].str());
}

std::string join_trimmed(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return std::string(kv::trim(out));
}

[[noreturn]] void bad_line(int line_no, std::string_view line, std::string_view why) {
  throw Error(ErrorCode::unparseable_assignment,
              fmt::format("line {}: cannot parse '{}': {}", line_no, kv::trim(line), why));
}

}  // namespace

void check_bounds(const ParamPatch& p, const PlanBounds& b) {
  auto fail = [&](std::string_view what, std::string_view limit) {
    throw Error(ErrorCode::bounds_violation,
                fmt::format("{}.{} = {} violates the {} limit {}", p.target, to_string(p.field),
                            p.value.rendered, what, limit));
  };
  switch (p.field) {
    case ParamField::W: {
      const double um = p.value.in_unit(-6);
      if (um < b.w_min_um) fail("W", fmt::format(">= {}", format_um(b.w_min_um)));
      if (um > b.w_max_um) fail("W", fmt::format("<= {}", format_um(b.w_max_um)));
      break;
    }
    case ParamField::L: {
      const double um = p.value.in_unit(-6);
      if (um < b.l_min_um) fail("L", fmt::format(">= {}", format_um(b.l_min_um)));
      if (um > b.l_max_um) fail("L", fmt::format("<= {}", format_um(b.l_max_um)));
      break;
    }
    case ParamField::M:
      if (p.value.value < b.m_min) fail("m", fmt::format(">= {}", b.m_min));
      if (p.value.value > b.m_max) fail("m", fmt::format("<= {}", b.m_max));
      break;
    case ParamField::VALUE: {
      const double pf = p.value.in_unit(-12);
      if (pf < b.c_min_pf) fail("capacitance", fmt::format(">= {}p", b.c_min_pf));
      if (pf > b.c_max_pf) fail("capacitance", fmt::format("<= {}p", b.c_max_pf));
      break;
    }
  }
}

ParseOptions role_parse_options(const NameMap& names, PlanBounds bounds) {
  ParseOptions o;
  o.bounds = bounds;
  o.devices.emplace();
  for (const auto& d : names.devices) o.devices->insert(kv::to_upper(d));
  o.capacitors = std::set<std::string>{kv::to_upper(names.c1)};
  return o;
}

ParamPatch parse_assignment(std::string_view line, int line_no, const ParseOptions& options) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) bad_line(line_no, line, "expected '='");
  const auto lhs = kv::trim(line.substr(0, eq));
  const auto rhs = kv::trim(line.substr(eq + 1));
  if (lhs.empty() || rhs.empty() || rhs.find_first_of(" \t=") != std::string_view::npos) {
    bad_line(line_no, line, "expected '<name>.<W|L|m> = <value>' or '<cap> = <value>'");
  }

  ParamPatch p;
  const auto dot = lhs.find('.');
  if (dot == std::string_view::npos) {
    p.target = std::string(lhs);
    p.field = ParamField::VALUE;
  } else {
    p.target = std::string(lhs.substr(0, dot));
    const auto f = kv::to_upper(lhs.substr(dot + 1));
    if (f == "W") p.field = ParamField::W;
    else if (f == "L") p.field = ParamField::L;
    else if (f == "M") p.field = ParamField::M;
    else bad_line(line_no, line, fmt::format("unknown field '{}'", lhs.substr(dot + 1)));
  }
  if (p.target.empty() || p.target.find_first_of(" \t") != std::string::npos) {
    bad_line(line_no, line, "bad element name");
  }

  if (p.field == ParamField::M) {
    int count = 0;
    const auto [ptr, ec] = std::from_chars(rhs.data(), rhs.data() + rhs.size(), count);
    if (ec != std::errc{} || ptr != rhs.data() + rhs.size()) {
      bad_line(line_no, line, "multiplier must be an integer");
    }
    p = ParamPatch::m(std::move(p.target), count);
  } else {
    try {
      p.value = EngNumber::parse(rhs);
    } catch (const Error& e) {
      bad_line(line_no, line, e.what());
    }
  }

  const auto up = kv::to_upper(p.target);
  if (p.field == ParamField::VALUE) {
    if (options.capacitors && !options.capacitors->contains(up)) {
      throw Error(ErrorCode::unknown_target,
                  fmt::format("line {}: '{}' is not an adjustable capacitor", line_no, p.target));
    }
  } else if (options.devices && !options.devices->contains(up)) {
    throw Error(ErrorCode::unknown_target,
                fmt::format("line {}: '{}' is not a sized device", line_no, p.target));
  }
  try {
    check_bounds(p, options.bounds);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("line {}: {}", line_no, e.what()));
  }
  return p;
}

ActionPlan parse_response(std::string_view text, const ParseOptions& options) {
  const auto lines = split_lines(text);

  std::optional<std::size_t> fence_line;
  std::size_t block_begin = 0, block_end = 0;
  for (std::size_t i = 0; i < lines.size() && !fence_line; ++i) {
    if (!is_fence(lines[i])) continue;
    const auto info = kv::trim(kv::trim(lines[i]).substr(3));
    std::size_t first = i + 1;
    bool hit = kv::to_upper(info) == "ACTIONS";
    if (!hit && first < lines.size() && kv::trim(lines[first]) == "ACTIONS") {
      hit = true;
      ++first;
    }
    std::size_t close = first;
    while (close < lines.size() && !is_fence(lines[close])) ++close;
    if (hit) {
      fence_line = i;
      block_begin = first;
      block_end = close;
    }
    i = close;
  }
  if (!fence_line) {
    throw Error(ErrorCode::missing_action_block, "reply has no fenced ACTIONS block");
  }

  ActionPlan plan;
  Section cur = Section::none;
  std::vector<std::string> obs, think;
  for (std::size_t i = 0; i < *fence_line; ++i) {
    if (auto h = match_header(lines[i])) {
      cur = h->first;
      if (!h->second.empty()) {
        if (cur == Section::observation) obs.push_back(h->second);
        if (cur == Section::thinking) think.push_back(h->second);
      }
      continue;
    }
    if (cur == Section::observation) obs.emplace_back(lines[i]);
    if (cur == Section::thinking) think.emplace_back(lines[i]);
  }
  plan.observation = join_trimmed(obs);
  plan.thinking = join_trimmed(think);

  bool done = false;
  for (std::size_t i = block_begin; i < block_end; ++i) {
    const auto t = kv::trim(lines[i]);
    const int line_no = static_cast<int>(i) + 1;
    if (t.empty() || t.starts_with('#')) continue;
    if (kv::to_upper(t) == "DONE") {
      done = true;
      continue;
    }
    plan.patches.push_back(parse_assignment(t, line_no, options));
  }
  if (done && !plan.patches.empty()) {
    throw Error(ErrorCode::unparseable_assignment, "DONE must be the only entry of the ACTIONS block");
  }
  if (!done && plan.patches.empty()) {
    throw Error(ErrorCode::missing_action_block, "ACTIONS block is empty");
  }
  plan.declared_done = done;
  return plan;
}

std::string render_patch(const ParamPatch& p) {
  if (p.field == ParamField::VALUE) return fmt::format("{} = {}", p.target, p.value.rendered);
  const auto f = p.field == ParamField::M ? std::string_view("m") : to_string(p.field);
  return fmt::format("{}.{} = {}", p.target, f, p.value.rendered);
}

std::string render_plan(const ActionPlan& plan) {
  std::string out = fmt::format("Observation:\n{}\n\nThinking Process:\n{}\n\nAction:\n```\nACTIONS\n",
                                plan.observation, plan.thinking);
  if (plan.declared_done) {
    out += "DONE\n";
  } else {
    for (const auto& p : plan.patches) out += render_patch(p) + "\n";
  }
  out += "```\n";
  return out;
}

}  // namespace sizer
