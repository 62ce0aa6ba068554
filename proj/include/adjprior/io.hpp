#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "adjprior/adjacency.hpp"
#include "adjprior/errors.hpp"
#include "adjprior/metrics.hpp"
#include "adjprior/phantom.hpp"
#include "adjprior/volume.hpp"

namespace adjprior {

// AVOL container: 8-byte magic "AVOL0001", 4-byte little-endian header
// length, UTF-8 JSON header, then the raw little-endian payload in storage
// order (x fastest, class fastest within a voxel). Label payloads are u8
// when num_classes <= 256 and u16 otherwise; prob and logit payloads are
// f32 (in-memory doubles are quantized once on save, so save-load-save is
// byte identical).

inline constexpr char kVolumeMagic[9] = "AVOL0001";

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("cannot read " + path);
  return data;
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw io_error("cannot write " + path);
}

inline void append_u32_le(std::string& s, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8)
    s.push_back(static_cast<char>((v >> shift) & 0xff));
}

inline void append_u16_le(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void append_f32_le(std::string& s, float v) {
  append_u32_le(s, std::bit_cast<std::uint32_t>(v));
}

inline std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16_le(const unsigned char* p) {
  return static_cast<std::uint16_t>(static_cast<std::uint16_t>(p[0]) |
                                    (static_cast<std::uint16_t>(p[1]) << 8));
}

inline float get_f32_le(const unsigned char* p) {
  return std::bit_cast<float>(get_u32_le(p));
}

inline nlohmann::json volume_header_json(const GridDims& g, const Spacing& s,
                                         int num_classes, const char* kind,
                                         const char* dtype,
                                         const std::string& rng_algorithm) {
  nlohmann::json j{{"dims", {g.h, g.w, g.d}},
                   {"spacing", {s.sx, s.sy, s.sz}},
                   {"num_classes", num_classes},
                   {"kind", kind},
                   {"dtype", dtype}};
  if (!rng_algorithm.empty()) j["rng_algorithm"] = rng_algorithm;
  return j;
}

inline std::string container_bytes(const nlohmann::json& header,
                                   const std::string& payload) {
  std::string out(kVolumeMagic, 8);
  std::string h = header.dump();
  append_u32_le(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  out += payload;
  return out;
}

}  // namespace detail

inline void save_volume(const LabelMap& v, const std::string& path,
                        const std::string& rng_algorithm = {}) {
  v.validate();
  const bool narrow = v.num_classes <= 256;
  std::string payload;
  payload.reserve(v.voxels.size() * (narrow ? 1 : 2));
  for (std::uint16_t x : v.voxels) {
    if (narrow)
      payload.push_back(static_cast<char>(x & 0xff));
    else
      detail::append_u16_le(payload, x);
  }
  detail::write_file(
      path, detail::container_bytes(
                detail::volume_header_json(v.dims, v.spacing, v.num_classes,
                                           "label", narrow ? "u8" : "u16",
                                           rng_algorithm),
                payload));
}

namespace detail {

inline void save_real_volume(const GridDims& dims, const Spacing& spacing,
                             int num_classes, const std::vector<double>& values,
                             const char* kind, const std::string& path,
                             const std::string& rng_algorithm) {
  std::string payload;
  payload.reserve(values.size() * 4);
  for (double x : values) append_f32_le(payload, static_cast<float>(x));
  write_file(path,
             container_bytes(volume_header_json(dims, spacing, num_classes,
                                                kind, "f32", rng_algorithm),
                             payload));
}

}  // namespace detail

inline void save_volume(const ProbMap& v, const std::string& path,
                        const std::string& rng_algorithm = {}) {
  v.validate();
  detail::save_real_volume(v.dims, v.spacing, v.num_classes, v.values, "prob",
                           path, rng_algorithm);
}

inline void save_volume(const LogitMap& v, const std::string& path,
                        const std::string& rng_algorithm = {}) {
  v.validate();
  detail::save_real_volume(v.dims, v.spacing, v.num_classes, v.values, "logit",
                           path, rng_algorithm);
}

struct LoadedVolume {
  std::variant<LabelMap, ProbMap, LogitMap> data;
  std::string rng_algorithm;

  bool is_label() const { return std::holds_alternative<LabelMap>(data); }
  bool is_prob() const { return std::holds_alternative<ProbMap>(data); }
  bool is_logit() const { return std::holds_alternative<LogitMap>(data); }
};

inline LoadedVolume load_volume(const std::string& path) {
  const std::string raw = detail::read_file(path);
  if (raw.size() < 8 || raw.compare(0, 8, kVolumeMagic, 8) != 0)
    throw bad_magic_error(path + ": bad magic");
  if (raw.size() < 12)
    throw truncated_payload_error(path + ": truncated before header length");
  const unsigned char* bytes =
      reinterpret_cast<const unsigned char*>(raw.data());
  const std::uint64_t header_len = detail::get_u32_le(bytes + 8);
  if (12 + header_len > raw.size())
    throw truncated_payload_error(path + ": truncated inside header");

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(raw.begin() + 12,
                              raw.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception&) {
    throw header_mismatch_error(path + ": header is not valid JSON");
  }

  GridDims dims;
  Spacing spacing;
  int num_classes = 0;
  std::string kind, dtype, rng_algorithm;
  try {
    dims.h = h.at("dims").at(0).get<int>();
    dims.w = h.at("dims").at(1).get<int>();
    dims.d = h.at("dims").at(2).get<int>();
    spacing.sx = h.at("spacing").at(0).get<double>();
    spacing.sy = h.at("spacing").at(1).get<double>();
    spacing.sz = h.at("spacing").at(2).get<double>();
    num_classes = h.at("num_classes").get<int>();
    kind = h.at("kind").get<std::string>();
    dtype = h.at("dtype").get<std::string>();
    if (h.contains("rng_algorithm"))
      rng_algorithm = h.at("rng_algorithm").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw header_mismatch_error(path + ": header field missing or mistyped");
  }
  try {
    validate_dims(dims);
    validate_spacing(spacing);
  } catch (const validation_error& e) {
    throw header_mismatch_error(path + ": " + e.what());
  }
  if (num_classes < 1)
    throw header_mismatch_error(path + ": num_classes must be >= 1");

  const bool label_kind = kind == "label";
  const bool real_kind = kind == "prob" || kind == "logit";
  if (!label_kind && !real_kind)
    throw header_mismatch_error(path + ": unknown kind '" + kind + "'");
  if (label_kind && dtype != "u8" && dtype != "u16")
    throw header_mismatch_error(path + ": label volumes need dtype u8 or u16");
  if (real_kind && dtype != "f32")
    throw header_mismatch_error(path + ": " + kind + " volumes need dtype f32");

  const std::int64_t n = dims.voxel_count();
  const std::int64_t elems = label_kind ? n : n * num_classes;
  const std::int64_t elem_size = label_kind ? (dtype == "u8" ? 1 : 2) : 4;
  const std::uint64_t expected =
      static_cast<std::uint64_t>(elems) * static_cast<std::uint64_t>(elem_size);
  const std::uint64_t have = raw.size() - 12 - header_len;
  if (have < expected)
    throw truncated_payload_error(path + ": payload shorter than header declares");
  if (have > expected)
    throw header_mismatch_error(path + ": payload longer than header declares");

  const unsigned char* payload = bytes + 12 + header_len;
  if (label_kind) {
    std::vector<std::uint16_t> voxels(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      std::uint16_t v = dtype == "u8"
                            ? payload[i]
                            : detail::get_u16_le(payload + 2 * i);
      if (v >= num_classes)
        throw label_range_error(path + ": label value >= num_classes");
      voxels[static_cast<std::size_t>(i)] = v;
    }
    return {LabelMap(dims, spacing, num_classes, std::move(voxels)),
            std::move(rng_algorithm)};
  }

  std::vector<double> values(static_cast<std::size_t>(elems));
  for (std::int64_t i = 0; i < elems; ++i)
    values[static_cast<std::size_t>(i)] =
        static_cast<double>(detail::get_f32_le(payload + 4 * i));
  if (kind == "prob") {
    // f32 quantization widens the per-voxel sum tolerance slightly.
    const double tol = 1e-6 + 1.2e-7 * num_classes;
    for (std::int64_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (int c = 0; c < num_classes; ++c) {
        double p = values[static_cast<std::size_t>(i * num_classes + c)];
        if (!(p >= 0.0 && p <= 1.0))
          throw header_mismatch_error(path + ": prob entry outside [0, 1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > tol)
        throw header_mismatch_error(path + ": prob voxel does not sum to 1");
    }
    ProbMap p(dims, spacing, num_classes);
    p.values = std::move(values);
    return {std::move(p), std::move(rng_algorithm)};
  }
  for (double v : values)
    if (!std::isfinite(v))
      throw header_mismatch_error(path + ": logit value not finite");
  LogitMap z(dims, spacing, num_classes);
  z.values = std::move(values);
  return {std::move(z), std::move(rng_algorithm)};
}

inline LabelMap load_labelmap(const std::string& path) {
  LoadedVolume v = load_volume(path);
  if (!v.is_label())
    throw validation_error(path + ": expected a label volume");
  return std::get<LabelMap>(std::move(v.data));
}

// ---------------------------------------------------------------------------
// Adjacency documents: JSON with format tag "adjprior/1".

enum class AdjKind { counts, binary, probabilistic };

inline const char* to_string(AdjKind k) {
  switch (k) {
    case AdjKind::counts: return "counts";
    case AdjKind::binary: return "binary";
    default: return "probabilistic";
  }
}

struct PriorDocument {
  AdjKind kind = AdjKind::probabilistic;
  int num_classes = 0;
  int num_subjects = 0;
  std::vector<std::string> labels;  // optional label names, may be empty
  std::vector<double> matrix;       // row-major (num_classes)^2
};

namespace detail {

inline void validate_prior_document(const PriorDocument& doc) {
  if (doc.num_classes < 1)
    throw validation_error("adjacency document: num_classes must be >= 1");
  if (doc.num_subjects < 1)
    throw validation_error("adjacency document: num_subjects must be >= 1");
  const std::size_t nc = static_cast<std::size_t>(doc.num_classes);
  if (doc.matrix.size() != nc * nc)
    throw validation_error("adjacency document: matrix size mismatch");
  if (!doc.labels.empty() && doc.labels.size() != nc)
    throw validation_error("adjacency document: label name count mismatch");
  for (std::size_t b = 0; b < nc; ++b) {
    if (doc.matrix[b * nc + b] != 0.0)
      throw validation_error("adjacency document: nonzero diagonal");
    for (std::size_t c = b + 1; c < nc; ++c)
      if (doc.matrix[b * nc + c] != doc.matrix[c * nc + b])
        throw validation_error("adjacency document: asymmetric matrix");
  }
  for (double v : doc.matrix) {
    if (!std::isfinite(v) || v < 0.0)
      throw validation_error("adjacency document: entry outside range");
    if (doc.kind == AdjKind::binary && v != 0.0 && v != 1.0)
      throw validation_error("adjacency document: binary entry not 0/1");
    if (doc.kind == AdjKind::probabilistic && v > 1.0)
      throw validation_error("adjacency document: probability entry > 1");
  }
}

inline void write_prior_document(const PriorDocument& doc,
                                 const std::string& path) {
  validate_prior_document(doc);
  nlohmann::json j{{"format", "adjprior/1"},
                   {"kind", to_string(doc.kind)},
                   {"num_classes", doc.num_classes},
                   {"num_subjects", doc.num_subjects},
                   {"matrix", doc.matrix}};
  if (!doc.labels.empty()) j["labels"] = doc.labels;
  write_file(path, j.dump(2) + "\n");
}

}  // namespace detail

inline void save_prior(const PriorAdj& prior, const std::string& path,
                       const std::vector<std::string>& labels = {}) {
  detail::write_prior_document({AdjKind::probabilistic, prior.num_classes,
                                prior.num_subjects, labels, prior.m},
                               path);
}

inline void save_prior_counts(const AdjCounts& counts, int num_subjects,
                              const std::string& path,
                              const std::vector<std::string>& labels = {}) {
  detail::write_prior_document(
      {AdjKind::counts, counts.num_classes, num_subjects, labels, counts.m},
      path);
}

inline void save_prior_binary(const BinaryAdj& adj, const std::string& path,
                              const std::vector<std::string>& labels = {}) {
  std::vector<double> m(adj.m.begin(), adj.m.end());
  detail::write_prior_document(
      {AdjKind::binary, adj.num_classes, 1, labels, std::move(m)}, path);
}

inline PriorDocument load_prior_document(const std::string& path) {
  const std::string raw = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    throw format_error(path + ": not valid JSON");
  }
  PriorDocument doc;
  try {
    if (j.at("format").get<std::string>() != "adjprior/1")
      throw format_error(path + ": unsupported format tag");
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "counts")
      doc.kind = AdjKind::counts;
    else if (kind == "binary")
      doc.kind = AdjKind::binary;
    else if (kind == "probabilistic")
      doc.kind = AdjKind::probabilistic;
    else
      throw format_error(path + ": unknown kind '" + kind + "'");
    doc.num_classes = j.at("num_classes").get<int>();
    doc.num_subjects = j.at("num_subjects").get<int>();
    doc.matrix = j.at("matrix").get<std::vector<double>>();
    if (j.contains("labels"))
      doc.labels = j.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw format_error(path + ": document field missing or mistyped");
  }
  detail::validate_prior_document(doc);
  return doc;
}

// Loads a probabilistic (or binary, promoted to 0/1 frequencies) prior.
inline PriorAdj load_prior(const std::string& path) {
  PriorDocument doc = load_prior_document(path);
  if (doc.kind == AdjKind::counts)
    throw validation_error(path + ": counts document cannot serve as a prior");
  PriorAdj prior(doc.num_classes, doc.num_subjects);
  prior.m = std::move(doc.matrix);
  return prior;
}

// ---------------------------------------------------------------------------
// Number formatting: shortest representation that parses back to the same
// double, with a decimal point forced so integral values read as reals.

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// ---------------------------------------------------------------------------
// Metric reports.

enum class ReportFormat { json, csv };

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace detail

inline std::string report_to_csv(const MetricReport& r) {
  std::string out = "label,name,vol_gt_cm3,vol_pred_cm3,err_cm3,err_pct,dsc,hd95_mm\n";
  for (const LabelMetrics& m : r.labels) {
    out += std::to_string(m.label);
    out += ',';
    out += detail::csv_field(m.name);
    out += ',';
    out += format_double(m.vol_gt_cm3);
    out += ',';
    out += format_double(m.vol_pred_cm3);
    out += ',';
    out += format_double(m.err_cm3);
    out += ',';
    out += detail::opt_field(m.err_pct);
    out += ',';
    out += detail::opt_field(m.dsc);
    out += ',';
    out += detail::opt_field(m.hd95_mm);
    out += '\n';
  }
  return out;
}

inline nlohmann::json report_to_json(const MetricReport& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json labels = nlohmann::json::array();
  for (const LabelMetrics& m : r.labels)
    labels.push_back({{"label", m.label},
                      {"name", m.name},
                      {"vol_gt_cm3", m.vol_gt_cm3},
                      {"vol_pred_cm3", m.vol_pred_cm3},
                      {"err_cm3", m.err_cm3},
                      {"err_pct", opt(m.err_pct)},
                      {"dsc", opt(m.dsc)},
                      {"hd95_mm", opt(m.hd95_mm)}});
  return nlohmann::json{{"format", "metricreport/1"},
                        {"dims", {r.dims.h, r.dims.w, r.dims.d}},
                        {"spacing", {r.spacing.sx, r.spacing.sy, r.spacing.sz}},
                        {"num_classes", r.num_classes},
                        {"labels", labels}};
}

inline void save_report(const MetricReport& r, const std::string& path,
                        ReportFormat format) {
  if (format == ReportFormat::csv)
    detail::write_file(path, report_to_csv(r));
  else
    detail::write_file(path, report_to_json(r).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Refinement traces.

inline std::string trace_to_csv(const std::vector<TraceRow>& trace) {
  std::string out = "step,phase,total,seg,dice,ce,nonadj\n";
  for (const TraceRow& r : trace) {
    out += std::to_string(r.step);
    out += ',';
    out += std::to_string(r.phase);
    out += ',';
    out += format_double(r.total);
    out += ',';
    out += format_double(r.seg);
    out += ',';
    out += format_double(r.dice);
    out += ',';
    out += format_double(r.ce);
    out += ',';
    out += format_double(r.nonadj);
    out += '\n';
  }
  return out;
}

inline void save_trace_csv(const std::vector<TraceRow>& trace,
                           const std::string& path) {
  detail::write_file(path, trace_to_csv(trace));
}

// ---------------------------------------------------------------------------
// Phantom specs.

inline void save_phantom_spec(const PhantomSpec& spec, const std::string& path) {
  spec.validate();
  nlohmann::json j{{"seed", spec.seed},
                   {"dims", {spec.dims.h, spec.dims.w, spec.dims.d}},
                   {"num_classes", spec.num_classes},
                   {"noise_sigma", spec.noise_sigma},
                   {"logit_gain", spec.logit_gain},
                   {"rng_algorithm", kRngAlgorithm}};
  detail::write_file(path, j.dump(2) + "\n");
}

inline PhantomSpec load_phantom_spec(const std::string& path) {
  const std::string raw = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    throw format_error(path + ": not valid JSON");
  }
  PhantomSpec spec;
  try {
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.dims.h = j.at("dims").at(0).get<int>();
    spec.dims.w = j.at("dims").at(1).get<int>();
    spec.dims.d = j.at("dims").at(2).get<int>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.noise_sigma = j.at("noise_sigma").get<double>();
    spec.logit_gain = j.at("logit_gain").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw format_error(path + ": spec field missing or mistyped");
  }
  spec.validate();
  return spec;
}

}  // namespace adjprior
