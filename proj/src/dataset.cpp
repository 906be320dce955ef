#include "gridscan/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "gridscan/error.hpp"

namespace gridscan {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ValidationError("matrix data size does not match shape");
  }
}

void Matrix::push_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) {
    throw ValidationError("row length does not match matrix width");
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

void Matrix::erase_row(std::size_t i) {
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(i * cols_);
  data_.erase(first, first + static_cast<std::ptrdiff_t>(cols_));
  --rows_;
}

namespace {

constexpr std::array<std::pair<AttributeKind, std::string_view>, 9> kKindNames{{
    {AttributeKind::generator_P, "generator_P"},
    {AttributeKind::generator_Q, "generator_Q"},
    {AttributeKind::load_P, "load_P"},
    {AttributeKind::load_Q, "load_Q"},
    {AttributeKind::interconnector_P, "interconnector_P"},
    {AttributeKind::interconnector_Q, "interconnector_Q"},
    {AttributeKind::hvdc_P, "hvdc_P"},
    {AttributeKind::hvdc_Q, "hvdc_Q"},
    {AttributeKind::other, "other"},
}};

bool starts_with_ci(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) != prefix[i]) {
      return false;
    }
  }
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

template <typename T>
bool parse_number(std::string_view cell, T& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace

std::string_view to_string(AttributeKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "other";
}

AttributeKind attribute_kind_from_string(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw ValidationError("unknown attribute kind '" + std::string(text) + "'");
}

AttributeKind infer_attribute_kind(std::string_view name) {
  const bool p = name.ends_with("_P") || name.ends_with("_p");
  const bool q = name.ends_with("_Q") || name.ends_with("_q");
  if (!p && !q) return AttributeKind::other;
  if (starts_with_ci(name, "gen") || starts_with_ci(name, "sync")) {
    return p ? AttributeKind::generator_P : AttributeKind::generator_Q;
  }
  if (starts_with_ci(name, "load")) {
    return p ? AttributeKind::load_P : AttributeKind::load_Q;
  }
  if (starts_with_ci(name, "inter")) {
    return p ? AttributeKind::interconnector_P : AttributeKind::interconnector_Q;
  }
  if (starts_with_ci(name, "hvdc")) {
    return p ? AttributeKind::hvdc_P : AttributeKind::hvdc_Q;
  }
  return AttributeKind::other;
}

double Attribute::to_normalized(double raw) const noexcept {
  if (!(raw_max > raw_min)) return 0.0;
  double v = 2.0 * (raw - raw_min) / (raw_max - raw_min) - 1.0;
  return std::clamp(v, -1.0, 1.0);
}

double Attribute::to_raw(double normalized) const noexcept {
  if (!(raw_max > raw_min)) return raw_min;
  return raw_min + (normalized + 1.0) * 0.5 * (raw_max - raw_min);
}

OperatingPointSet::OperatingPointSet(std::vector<Attribute> attributes,
                                     Matrix values,
                                     std::vector<std::int64_t> hours)
    : attributes_(std::move(attributes)),
      values_(std::move(values)),
      hours_(std::move(hours)) {
  if (values_.cols() != attributes_.size() && values_.rows() > 0) {
    throw ValidationError("value matrix has " + std::to_string(values_.cols()) +
                          " columns but " + std::to_string(attributes_.size()) +
                          " attributes were given");
  }
  if (hours_.size() != values_.rows()) {
    throw ValidationError("row count and timestamp count differ");
  }
  std::unordered_set<std::string> names;
  for (const auto& a : attributes_) {
    if (!(a.raw_min <= a.raw_max)) {
      throw ValidationError("attribute '" + a.name + "' has raw_min > raw_max");
    }
    if (!names.insert(a.name).second) {
      throw ValidationError("duplicate attribute name '" + a.name + "'");
    }
  }
  std::unordered_set<std::int64_t> seen;
  for (std::size_t i = 0; i < hours_.size(); ++i) {
    if (!seen.insert(hours_[i]).second) {
      throw ValidationError("duplicate hour " + std::to_string(hours_[i]));
    }
  }
  for (std::size_t i = 0; i < values_.rows(); ++i) {
    for (std::size_t j = 0; j < values_.cols(); ++j) {
      double v = values_(i, j);
      if (!(v >= -1.0 && v <= 1.0)) {
        throw ValidationError("normalized value out of [-1, 1] at row " +
                              std::to_string(i) + ", column " +
                              std::to_string(j));
      }
    }
  }
}

Matrix OperatingPointSet::denormalized() const {
  Matrix raw(values_.rows(), values_.cols());
  for (std::size_t i = 0; i < values_.rows(); ++i) {
    for (std::size_t j = 0; j < values_.cols(); ++j) {
      raw(i, j) = attributes_[j].to_raw(values_(i, j));
    }
  }
  return raw;
}

std::vector<std::size_t> OperatingPointSet::columns_of_kind(
    AttributeKind kind) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < attributes_.size(); ++j) {
    if (attributes_[j].kind == kind) out.push_back(j);
  }
  return out;
}

OperatingPointSet OperatingPointSet::subset(
    std::span<const std::size_t> rows) const {
  Matrix values(0, dimension());
  std::vector<std::int64_t> hours;
  hours.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw ValidationError("subset row out of range");
    values.push_row(point(r));
    hours.push_back(hours_[r]);
  }
  return OperatingPointSet(attributes_, std::move(values), std::move(hours));
}

OperatingPointSet normalize(const Matrix& raw, std::vector<Attribute> attributes,
                            std::vector<std::int64_t> hours) {
  if (attributes.size() != raw.cols()) {
    throw ValidationError("attribute count does not match column count");
  }
  if (hours.empty()) {
    hours.resize(raw.rows());
    for (std::size_t i = 0; i < hours.size(); ++i) {
      hours[i] = static_cast<std::int64_t>(i);
    }
  }
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    for (std::size_t j = 0; j < raw.cols(); ++j) {
      if (!std::isfinite(raw(i, j))) {
        throw ValidationError("non-finite value at row " + std::to_string(i) +
                              ", column " + std::to_string(j) + " ('" +
                              attributes[j].name + "')");
      }
    }
  }
  for (std::size_t j = 0; j < raw.cols(); ++j) {
    double lo = raw.rows() ? raw(0, j) : 0.0;
    double hi = lo;
    for (std::size_t i = 1; i < raw.rows(); ++i) {
      lo = std::min(lo, raw(i, j));
      hi = std::max(hi, raw(i, j));
    }
    attributes[j].raw_min = lo;
    attributes[j].raw_max = hi;
  }
  Matrix values(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    for (std::size_t j = 0; j < raw.cols(); ++j) {
      values(i, j) = attributes[j].to_normalized(raw(i, j));
    }
  }
  return OperatingPointSet(std::move(attributes), std::move(values),
                           std::move(hours));
}

OperatingPointSet parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      auto pos = text.find('\n', start);
      if (pos == std::string_view::npos) pos = text.size();
      lines.push_back(text.substr(start, pos - start));
      start = pos + 1;
    }
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("empty CSV: missing header row");

  std::string_view header_line = lines[0];
  if (header_line.starts_with("\xEF\xBB\xBF")) header_line.remove_prefix(3);
  auto header = split_commas(header_line);
  if (header.size() < 2 || header[0] != "hour") {
    throw ParseError("line 1: header must be 'hour,<attr1>,...'");
  }
  std::vector<Attribute> attributes;
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j].empty()) {
      throw ParseError("line 1: empty attribute name in column " +
                       std::to_string(j + 1));
    }
    attributes.push_back(
        {std::string(header[j]), infer_attribute_kind(header[j]), 0.0, 0.0});
  }

  Matrix raw(0, attributes.size());
  std::vector<std::int64_t> hours;
  std::unordered_set<std::int64_t> seen;
  std::vector<double> row(attributes.size());
  std::size_t data_row = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    ++data_row;
    const std::string where = "row " + std::to_string(data_row) + " (line " +
                              std::to_string(li + 1) + ")";
    auto cells = split_commas(lines[li]);
    if (cells.size() != header.size()) {
      throw ParseError(where + ": expected " + std::to_string(header.size()) +
                       " cells, found " + std::to_string(cells.size()));
    }
    std::int64_t hour = 0;
    if (!parse_number(cells[0], hour)) {
      throw ParseError(where + ", column 'hour': not an integer: '" +
                       std::string(cells[0]) + "'");
    }
    if (!seen.insert(hour).second) {
      throw ParseError(where + ": duplicate hour " + std::to_string(hour));
    }
    for (std::size_t j = 1; j < cells.size(); ++j) {
      double v = 0.0;
      if (!parse_number(cells[j], v) || !std::isfinite(v)) {
        throw ParseError(where + ", column '" + attributes[j - 1].name +
                         "': not a finite number: '" + std::string(cells[j]) +
                         "'");
      }
      row[j - 1] = v;
    }
    raw.push_row(row);
    hours.push_back(hour);
  }
  return normalize(raw, std::move(attributes), std::move(hours));
}

OperatingPointSet load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_csv(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_csv(const OperatingPointSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "hour";
  for (const auto& a : set.attributes()) out << ',' << a.name;
  out << '\n';
  Matrix raw = set.denormalized();
  char buf[32];
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.hours()[i];
    for (std::size_t j = 0; j < set.dimension(); ++j) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, raw(i, j));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

std::string normalization_sidecar_json(const OperatingPointSet& set) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& a : set.attributes()) {
    attrs.push_back({{"name", a.name},
                     {"kind", std::string(to_string(a.kind))},
                     {"raw_min", a.raw_min},
                     {"raw_max", a.raw_max}});
  }
  return nlohmann::json{{"attributes", attrs}}.dump(2);
}

void SyntheticYearConfig::validate() const {
  if (n_hours == 0) throw ValidationError("n_hours must be positive");
  if (n_attributes == 0) throw ValidationError("n_attributes must be positive");
  if (n_informative > n_attributes) {
    throw ValidationError("n_informative exceeds n_attributes");
  }
  if (!(seasonal_amplitude >= 0.0) || !(diurnal_amplitude >= 0.0)) {
    throw ValidationError("amplitudes must be non-negative");
  }
  if (!(noise_sigma >= 0.0)) {
    throw ValidationError("noise_sigma must be non-negative");
  }
}

namespace {

struct KindProfile {
  AttributeKind kind;
  std::string_view prefix;
  char suffix;
  double base;   // native units (MW or Mvar)
  double scale;  // native units per unit of signal
};

constexpr std::array<KindProfile, 8> kProfiles{{
    {AttributeKind::generator_P, "gen", 'P', 400.0, 180.0},
    {AttributeKind::generator_Q, "gen", 'Q', 60.0, 45.0},
    {AttributeKind::load_P, "load", 'P', 900.0, 320.0},
    {AttributeKind::load_Q, "load", 'Q', 180.0, 70.0},
    {AttributeKind::interconnector_P, "inter", 'P', 0.0, 450.0},
    {AttributeKind::interconnector_Q, "inter", 'Q', 0.0, 90.0},
    {AttributeKind::hvdc_P, "hvdc", 'P', 0.0, 350.0},
    {AttributeKind::hvdc_Q, "hvdc", 'Q', 20.0, 40.0},
}};

}  // namespace

SyntheticYear generate_synthetic_year(const SyntheticYearConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> gain(0.6, 1.4);
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t n = cfg.n_hours;
  const std::size_t d = cfg.n_attributes;

  std::vector<Attribute> attributes;
  std::array<int, kProfiles.size()> counters{};
  struct Shape {
    double seasonal_gain, seasonal_phase, diurnal_gain, diurnal_phase, base,
        scale;
  };
  std::vector<Shape> shapes;
  for (std::size_t j = 0; j < d; ++j) {
    const auto slot = j % kProfiles.size();
    const auto& prof = kProfiles[slot];
    char name[32];
    std::snprintf(name, sizeof name, "%.*s%02d_%c",
                  static_cast<int>(prof.prefix.size()), prof.prefix.data(),
                  ++counters[slot], prof.suffix);
    attributes.push_back({name, prof.kind, 0.0, 0.0});
    Shape s{};
    s.seasonal_gain = gain(rng);
    s.seasonal_phase = phase(rng);
    s.diurnal_gain = gain(rng);
    s.diurnal_phase = phase(rng);
    s.base = prof.base * jitter(rng);
    s.scale = prof.scale * jitter(rng);
    shapes.push_back(s);
  }

  std::vector<std::size_t> order(d);
  for (std::size_t j = 0; j < d; ++j) order[j] = j;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> informative(order.begin(),
                                       order.begin() + cfg.n_informative);
  std::sort(informative.begin(), informative.end());

  Matrix raw(n, d);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t t = 0; t < n; ++t) {
    const double season = two_pi * static_cast<double>(t) / static_cast<double>(n);
    const double day = two_pi * static_cast<double>(t % 24) / 24.0;
    for (std::size_t j = 0; j < d; ++j) {
      const auto& s = shapes[j];
      double signal =
          cfg.seasonal_amplitude * s.seasonal_gain *
              std::sin(season + s.seasonal_phase) +
          cfg.diurnal_amplitude * s.diurnal_gain * std::sin(day + s.diurnal_phase);
      double eps = noise(rng);
      signal += cfg.noise_sigma * eps;
      raw(t, j) = s.base + s.scale * signal;
    }
  }
  return {normalize(raw, std::move(attributes)), std::move(informative), cfg};
}

}  // namespace gridscan
