// Copyright 2026 The PCSC Authors
// SPDX-License-Identifier: Apache-2.0
//
#include "pcsc/config.h"

#include <fmt/format.h>

#include <boost/property_tree/exceptions.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "pcsc/error.h"

namespace pcsc {
namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<void(ScenarioConfig&, const std::string&)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

double ToDouble(const std::string& s) {
  size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters");
  return v;
}

long long ToInt(const std::string& s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("not an integer");
  }
  return v;
}

bool ToBool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("not a boolean");
}

template <typename Sel>
Field Real(std::string section, std::string key, Sel sel) {
  return {std::move(section), std::move(key),
          [sel](ScenarioConfig& c, const std::string& v) { sel(c) = ToDouble(v); },
          [sel](const ScenarioConfig& c) {
            return fmt::format("{:.6g}", sel(c));
          }};
}

template <typename Sel>
Field Integer(std::string section, std::string key, Sel sel) {
  return {std::move(section), std::move(key),
          [sel](ScenarioConfig& c, const std::string& v) {
            using T = std::remove_reference_t<decltype(sel(c))>;
            const long long x = ToInt(v);
            if constexpr (std::is_unsigned_v<T>) {
              if (x < 0) throw std::invalid_argument("negative");
            }
            sel(c) = static_cast<T>(x);
          },
          [sel](const ScenarioConfig& c) {
            return fmt::format("{}", sel(c));
          }};
}

template <typename Sel>
Field Flag(std::string section, std::string key, Sel sel) {
  return {std::move(section), std::move(key),
          [sel](ScenarioConfig& c, const std::string& v) { sel(c) = ToBool(v); },
          [sel](const ScenarioConfig& c) {
            return std::string(sel(c) ? "true" : "false");
          }};
}

#define PCSC_SEL(expr) [](auto& c) -> auto& { return c.expr; }

std::vector<Field> Fields() {
  std::vector<Field> f = {
      Integer("scenario", "num_videos", PCSC_SEL(num_videos)),
      Integer("scenario", "frames_per_video", PCSC_SEL(frames_per_video)),
      Integer("scenario", "num_classes", PCSC_SEL(num_classes)),
      Integer("scenario", "tubes_per_video", PCSC_SEL(tubes_per_video)),
      Real("scenario", "frame_width", PCSC_SEL(frame_width)),
      Real("scenario", "frame_height", PCSC_SEL(frame_height)),
      Real("scenario", "min_box", PCSC_SEL(min_box)),
      Real("scenario", "max_box", PCSC_SEL(max_box)),
      Integer("scenario", "min_tube_len", PCSC_SEL(min_tube_len)),
      Integer("scenario", "max_tube_len", PCSC_SEL(max_tube_len)),
      Real("scenario", "max_speed", PCSC_SEL(max_speed)),
      Integer("scenario", "proposals_per_object", PCSC_SEL(proposals_per_object)),
      Real("scenario", "complementarity", PCSC_SEL(complementarity)),
      Integer("scenario", "seed", PCSC_SEL(seed)),
      Integer("scenario", "num_seeds", PCSC_SEL(num_seeds)),
      Real("scenario", "train_fraction", PCSC_SEL(train_fraction)),
  };
  for (const char* s : {"rgb", "flow"}) {
    const bool rgb = std::string(s) == "rgb";
    auto sel = [rgb](auto& c) -> auto& { return rgb ? c.rgb : c.flow; };
    f.push_back(Real(s, "miss_prob", [sel](auto& c) -> auto& { return sel(c).miss_prob; }));
    f.push_back(Real(s, "jitter_sigma", [sel](auto& c) -> auto& { return sel(c).jitter_sigma; }));
    f.push_back(Real(s, "fp_rate", [sel](auto& c) -> auto& { return sel(c).fp_rate; }));
    f.push_back(Integer(s, "boundary_pad", [sel](auto& c) -> auto& { return sel(c).boundary_pad; }));
  }
  std::vector<Field> rest = {
      Real("head", "regression_fraction", PCSC_SEL(head.regression_fraction)),
      Real("head", "jitter_sigma", PCSC_SEL(head.jitter_sigma)),
      Real("head", "score_noise", PCSC_SEL(head.score_noise)),
      Real("head", "feature_weight", PCSC_SEL(head.feature_weight)),
      Real("head", "distractor_factor", PCSC_SEL(head.distractor_factor)),
      Integer("features", "channels", PCSC_SEL(features.channels)),
      Integer("features", "reduction", PCSC_SEL(features.reduction)),
      Integer("features", "stride", PCSC_SEL(features.stride)),
      Real("features", "noise", PCSC_SEL(features.noise)),
      Real("features", "message_gain", PCSC_SEL(features.message_gain)),
      Integer("features", "roi_size", PCSC_SEL(features.roi_size)),
      Flag("features", "share_roi_params", PCSC_SEL(features.share_roi_params)),
      Real("cooperation", "nms_standard", PCSC_SEL(cooperation.nms_standard)),
      Real("cooperation", "nms_cross", PCSC_SEL(cooperation.nms_cross)),
      Real("cooperation", "confidence_min", PCSC_SEL(cooperation.confidence_min)),
      Integer("cooperation", "num_stages", PCSC_SEL(cooperation.num_stages)),
      {"cooperation", "cross_order",
       [](ScenarioConfig& c, const std::string& v) {
         if (v == "filter_then_nms") {
           c.cooperation.cross_order = CrossFilterOrder::kFilterThenNms;
         } else if (v == "nms_then_filter") {
           c.cooperation.cross_order = CrossFilterOrder::kNmsThenFilter;
         } else {
           throw std::invalid_argument("expected filter_then_nms or nms_then_filter");
         }
       },
       [](const ScenarioConfig& c) {
         return std::string(c.cooperation.cross_order == CrossFilterOrder::kFilterThenNms
                                ? "filter_then_nms"
                                : "nms_then_filter");
       }},
      Flag("cooperation", "feature_cooperation", PCSC_SEL(feature_cooperation)),
      Real("link", "lambda", PCSC_SEL(link.lambda)),
      Real("link", "iou_min", PCSC_SEL(link.iou_min)),
      Integer("link", "max_gap", PCSC_SEL(link.max_gap)),
      Integer("link", "min_len", PCSC_SEL(link.min_len)),
      Integer("refine", "window", PCSC_SEL(refine.window)),
      Real("refine", "tau", PCSC_SEL(refine.tau)),
      Integer("refine", "min_seg_len", PCSC_SEL(refine.min_seg_len)),
      Integer("refine", "epochs", PCSC_SEL(train.epochs)),
      Real("refine", "learning_rate", PCSC_SEL(train.learning_rate)),
      Integer("refine", "batch_size", PCSC_SEL(train.batch_size)),
  };
  f.insert(f.end(), rest.begin(), rest.end());
  return f;
}

#undef PCSC_SEL

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// 1-based line of `section.key` in `text`, or 0 when not found.
int LineOf(const std::string& text, const std::string& section,
           const std::string& key) {
  std::istringstream in(text);
  std::string line;
  std::string current;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = Trim(line);
    if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
      current = Trim(t.substr(1, t.size() - 2));
      if (key.empty() && current == section) return n;
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos && current == section &&
        Trim(t.substr(0, eq)) == key) {
      return n;
    }
  }
  return 0;
}

}  // namespace

ScenarioConfig ParseConfig(const std::string& text, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(
        fmt::format("{}:{}: {}", source, e.line(), e.message()));
  }

  const auto fields = Fields();
  ScenarioConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.data().size() && body.empty()) {
      throw ValidationError(fmt::format(
          "{}:{}: key '{}' outside of any section", source,
          LineOf(text, "", section), section));
    }
    bool known_section = false;
    for (const auto& f : fields) known_section = known_section || f.section == section;
    if (!known_section) {
      throw ValidationError(fmt::format("{}:{}: unknown config section '{}'",
                                        source, LineOf(text, section, ""),
                                        section));
    }
    for (const auto& [key, value] : body) {
      const Field* field = nullptr;
      for (const auto& f : fields) {
        if (f.section == section && f.key == key) field = &f;
      }
      const int line = LineOf(text, section, key);
      if (!field) {
        throw ValidationError(fmt::format("{}:{}: unknown config key '{}.{}'",
                                          source, line, section, key));
      }
      try {
        field->set(cfg, Trim(value.data()));
      } catch (const std::exception& e) {
        throw ValidationError(fmt::format(
            "{}:{}: invalid value '{}' for config key '{}.{}' ({})", source,
            line, value.data(), section, key, e.what()));
      }
    }
  }
  try {
    cfg.Validate();
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", source, e.what()));
  }
  return cfg;
}

ScenarioConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str(), path);
}

std::string ConfigToIni(const ScenarioConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& f : Fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += fmt::format("[{}]\n", section);
    }
    out += fmt::format("{} = {}\n", f.key, f.get(cfg));
  }
  return out;
}

std::string ConfigHash(const ScenarioConfig& cfg) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : ConfigToIni(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace pcsc
