#include "assign/problem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "assign/errors.hpp"
#include "assign/io_util.hpp"
#include "assign/log.hpp"
#include "assign/rng.hpp"
#include "json.hpp"

namespace assign {

const char* objective_kind_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::quadratic: return "quadratic";
    case ObjectiveKind::logarithmic: return "logarithmic";
    case ObjectiveKind::linear: return "linear";
  }
  fail("bad_objective", "unknown objective kind");
}

ObjectiveKind objective_kind_from_name(std::string_view name) {
  if (name == "quadratic" || name == "quad") return ObjectiveKind::quadratic;
  if (name == "logarithmic" || name == "log") return ObjectiveKind::logarithmic;
  if (name == "linear") return ObjectiveKind::linear;
  fail("bad_objective", "unknown objective kind '" + std::string(name) + "'");
}

double ProblemSpec::coeff_bound() const {
  double bound = 0.0;
  for (double v : items.data()) bound = std::max(bound, std::abs(v));
  return bound;
}

namespace {

void check_finite_row(const MatrixD& m, const char* field) {
  for (double v : m.data()) {
    if (std::isnan(v))
      fail("dimension-mismatch", std::string(field) + " contains NaN");
  }
}

}  // namespace

const ProblemSpec& validate(const ProblemSpec& spec) {
  if (spec.I == 0) fail("dimension-mismatch", "num_items must be positive");
  if (spec.J == 0) fail("dimension-mismatch", "num_owners must be positive");
  const std::size_t row_len = spec.J + spec.M + spec.N;
  if (spec.items.rows() != spec.I || spec.items.cols() != row_len)
    fail("dimension-mismatch",
         "item_rows must be " + std::to_string(spec.I) + " x " +
             std::to_string(row_len) + ", got " +
             std::to_string(spec.items.rows()) + " x " +
             std::to_string(spec.items.cols()));
  if (spec.b.rows() != spec.M || (spec.M > 0 && spec.b.cols() != spec.J))
    fail("dimension-mismatch", "ineq_bounds b must be M x J");
  if (spec.c.rows() != spec.N || (spec.N > 0 && spec.c.cols() != spec.J))
    fail("dimension-mismatch", "eq_targets c must be N x J");
  check_finite_row(spec.items, "item_rows");
  for (double v : spec.items.data())
    if (std::isinf(v)) fail("dimension-mismatch", "item_rows contains inf");

  switch (spec.objective.kind) {
    case ObjectiveKind::quadratic:
      if (spec.objective.alpha.size() != spec.J)
        fail("dimension-mismatch", "objective.alpha must have J entries");
      break;
    case ObjectiveKind::logarithmic:
      if (spec.objective.a.size() != spec.J)
        fail("dimension-mismatch", "objective.a must have J entries");
      break;
    case ObjectiveKind::linear:
      break;
  }

  if (!(spec.rho > 0.0)) fail("nonpositive-rho", "rho must be positive");
  if (spec.beta < spec.beta_bound() && !spec.allow_low_beta)
    fail("beta-below-bound",
         "beta " + format_double(spec.beta) + " is below (rho/2)*I*(M+N) = " +
             format_double(spec.beta_bound()) +
             " (set allow_low_beta to accept)");
  if (spec.beta < spec.beta_bound() && spec.allow_low_beta)
    log_info("beta ", spec.beta, " below the sufficient bound ",
             spec.beta_bound(), "; accepted by override");
  if (!(spec.beta > 0.0)) fail("beta-below-bound", "beta must be positive");

  for (std::size_t m = 0; m < spec.M; ++m)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double v = spec.b.at(m, j);
      if (std::isnan(v)) fail("dimension-mismatch", "b contains NaN");
      if (std::isinf(v) && v < 0)
        fail("dimension-mismatch", "b contains -inf (unsatisfiable bound)");
    }
  for (std::size_t n = 0; n < spec.N; ++n)
    for (std::size_t j = 0; j < spec.J; ++j) {
      double v = spec.c.at(n, j);
      if (std::isnan(v)) fail("dimension-mismatch", "c contains NaN");
      if (v == 0.0)
        fail("zero-equality-target",
             "c[" + std::to_string(n) + "][" + std::to_string(j) +
                 "] is zero; equality targets are APD denominators");
    }
  if (spec.partitions == 0 || spec.partitions > spec.I)
    fail("invalid-P", "partitions must be in [1, I]");
  return spec;
}

namespace {

ProblemSpec generate_base(std::size_t I, std::size_t J, std::size_t M,
                          std::size_t N, ObjectiveKind kind,
                          std::uint64_t seed, bool uneven) {
  if (I == 0 || J == 0)
    fail("dimension-mismatch", "I and J must be positive");
  if (kind == ObjectiveKind::linear)
    fail("bad_objective",
         "generator supports quadratic and logarithmic objectives");
  if (uneven && I % 2 != 0)
    fail("odd-I", "uneven generation needs an even item count");

  ProblemSpec spec;
  spec.I = I;
  spec.J = J;
  spec.M = M;
  spec.N = N;
  spec.seed = seed;
  spec.items = MatrixD(I, J + M + N);
  const std::size_t half = I / 2;
  for (std::size_t i = 0; i < I; ++i) {
    const double scale = (uneven && i >= half) ? 10.0 : 1.0;
    auto row = spec.items.row(i);
    for (std::size_t j = 0; j < J; ++j)
      row[j] = scale * rng_uniform(seed, RngStream::omega, i * J + j, 0.0, 1.0);
    for (std::size_t m = 0; m < M; ++m)
      row[J + m] =
          scale * rng_uniform(seed, RngStream::ineq_feature, i * M + m, -1.0, 0.0);
    for (std::size_t n = 0; n < N; ++n)
      row[J + M + n] =
          scale * rng_uniform(seed, RngStream::eq_feature, i * N + n, 0.0, 1.0);
  }

  const double over_j = static_cast<double>(I) / static_cast<double>(J);
  spec.b = MatrixD(M, J, -0.3 * over_j);
  spec.c = MatrixD(N, J, 0.3 * over_j);

  spec.objective.kind = kind;
  if (kind == ObjectiveKind::quadratic) {
    spec.objective.alpha.assign(J, 1e-4 * static_cast<double>(I));
    spec.rho = 1e-3;
  } else {
    spec.objective.a.assign(J, 1e-1 * static_cast<double>(I));
    spec.rho = 1e-5;
  }
  spec.beta = spec.beta_bound();
  spec.partitions = std::min<std::size_t>(16, I);
  return spec;
}

}  // namespace

ProblemSpec generate_synthetic(std::size_t I, std::size_t J, std::size_t M,
                               std::size_t N, ObjectiveKind kind,
                               std::uint64_t seed) {
  ProblemSpec spec = generate_base(I, J, M, N, kind, seed, false);
  validate(spec);
  return spec;
}

ProblemSpec generate_uneven(std::size_t I, std::size_t J, std::size_t M,
                            std::size_t N, ObjectiveKind kind,
                            std::uint64_t seed) {
  ProblemSpec spec = generate_base(I, J, M, N, kind, seed, true);
  validate(spec);
  return spec;
}

std::vector<Partition> partition_items(const ProblemSpec& spec, std::size_t P) {
  if (P == 0 || P > spec.I) fail("invalid-P", "P must be in [1, I]");
  std::vector<Partition> parts;
  parts.reserve(P);
  const std::size_t base = spec.I / P;
  const std::size_t rem = spec.I % P;
  std::size_t lo = 0;
  for (std::size_t p = 0; p < P; ++p) {
    const std::size_t size = base + (p < rem ? 1 : 0);
    parts.push_back({p, lo, lo + size});
    lo += size;
  }
  return parts;
}

namespace {

std::string matrix_to_csv(const MatrixD& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m.at(i, j));
    }
    out += '\n';
  }
  return out;
}

MatrixD matrix_from_csv(const std::string& text, std::size_t rows,
                        std::size_t cols, const std::string& name) {
  auto lines = split_lines(text);
  if (lines.size() != rows)
    fail("malformed-manifest", name + " has " + std::to_string(lines.size()) +
                                   " rows, expected " + std::to_string(rows));
  MatrixD m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    auto cells = split_csv_line(lines[i]);
    if (cells.size() != cols)
      fail("malformed-manifest", name + " row " + std::to_string(i) + " has " +
                                     std::to_string(cells.size()) +
                                     " columns, expected " +
                                     std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j) m.at(i, j) = parse_double(cells[j]);
  }
  return m;
}

std::string file_crc_hex(const std::filesystem::path& path) {
  std::string bytes = read_text_file(path);
  return to_hex16(crc64(bytes.data(), bytes.size()));
}

}  // namespace

void save_problem(const ProblemSpec& spec, const std::filesystem::path& dir) {
  validate(spec);
  std::error_code ec;
  std::filesystem::create_directories(dir / "partitions", ec);
  if (ec) fail("io-failure", "cannot create " + (dir / "partitions").string());

  nlohmann::json manifest;
  manifest["I"] = spec.I;
  manifest["J"] = spec.J;
  manifest["M"] = spec.M;
  manifest["N"] = spec.N;
  manifest["objective"]["kind"] = objective_kind_name(spec.objective.kind);
  if (spec.objective.kind == ObjectiveKind::quadratic)
    manifest["objective"]["alpha"] = spec.objective.alpha;
  else if (spec.objective.kind == ObjectiveKind::logarithmic)
    manifest["objective"]["a"] = spec.objective.a;
  manifest["rho"] = spec.rho;
  manifest["beta"] = spec.beta;
  manifest["partitions"] = spec.partitions;
  manifest["seed"] = spec.seed;
  manifest["format_version"] = 1;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  write_text_file(dir / "b.csv", matrix_to_csv(spec.b));
  write_text_file(dir / "c.csv", matrix_to_csv(spec.c));

  std::vector<std::string> shard_names = {"b.csv", "c.csv"};
  auto parts = partition_items(spec, spec.partitions);
  for (const auto& part : parts) {
    std::string out;
    for (std::size_t i = part.lo; i < part.hi; ++i) {
      out += std::to_string(i);
      for (double v : spec.items.row(i)) {
        out += ',';
        out += format_double(v);
      }
      out += '\n';
    }
    std::string rel = "partitions/part-" + std::to_string(part.partition_id) +
                      ".csv";
    write_text_file(dir / rel, out);
    shard_names.push_back(rel);
  }

  nlohmann::json sums;
  for (const auto& rel : shard_names) sums[rel] = file_crc_hex(dir / rel);
  write_text_file(dir / "checksums.json", sums.dump(2) + "\n");
}

ProblemSpec load_problem(const std::filesystem::path& dir) {
  auto require = [&](const std::filesystem::path& p) {
    if (!std::filesystem::exists(p))
      fail("io-failure", "missing file " + p.string());
    return p;
  };

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(require(dir / "manifest.json")));
  } catch (const nlohmann::json::exception& e) {
    fail("malformed-manifest", e.what());
  }

  ProblemSpec spec;
  try {
    if (manifest.at("format_version").get<int>() != 1)
      fail("malformed-manifest", "unsupported format_version");
    spec.I = manifest.at("I").get<std::size_t>();
    spec.J = manifest.at("J").get<std::size_t>();
    spec.M = manifest.at("M").get<std::size_t>();
    spec.N = manifest.at("N").get<std::size_t>();
    spec.objective.kind =
        objective_kind_from_name(manifest.at("objective").at("kind").get<std::string>());
    if (spec.objective.kind == ObjectiveKind::quadratic)
      spec.objective.alpha =
          manifest.at("objective").at("alpha").get<std::vector<double>>();
    else if (spec.objective.kind == ObjectiveKind::logarithmic)
      spec.objective.a = manifest.at("objective").at("a").get<std::vector<double>>();
    spec.rho = manifest.at("rho").get<double>();
    spec.beta = manifest.at("beta").get<double>();
    spec.partitions = manifest.at("partitions").get<std::size_t>();
    spec.seed = manifest.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail("malformed-manifest", e.what());
  }

  nlohmann::json sums;
  try {
    sums = nlohmann::json::parse(read_text_file(require(dir / "checksums.json")));
  } catch (const nlohmann::json::exception& e) {
    fail("malformed-manifest", e.what());
  }
  auto check_shard = [&](const std::string& rel) {
    require(dir / rel);
    if (!sums.contains(rel))
      fail("shard-checksum-mismatch", rel + " missing from checksums.json");
    std::string actual = file_crc_hex(dir / rel);
    if (sums[rel].get<std::string>() != actual)
      fail("shard-checksum-mismatch", rel + " checksum " + actual +
                                          " does not match manifest entry");
  };

  check_shard("b.csv");
  check_shard("c.csv");
  spec.b = matrix_from_csv(read_text_file(dir / "b.csv"), spec.M, spec.J, "b.csv");
  spec.c = matrix_from_csv(read_text_file(dir / "c.csv"), spec.N, spec.J, "c.csv");

  const std::size_t row_len = spec.J + spec.M + spec.N;
  spec.items = MatrixD(spec.I, row_len);
  std::vector<bool> seen(spec.I, false);
  std::size_t total_rows = 0;
  for (std::size_t p = 0; p < spec.partitions; ++p) {
    std::string rel = "partitions/part-" + std::to_string(p) + ".csv";
    check_shard(rel);
    auto text = read_text_file(dir / rel);
    for (auto line : split_lines(text)) {
      auto cells = split_csv_line(line);
      if (cells.size() != row_len + 1)
        fail("malformed-manifest", rel + " row has " +
                                       std::to_string(cells.size()) +
                                       " fields, expected " +
                                       std::to_string(row_len + 1));
      double id_raw = parse_double(cells[0]);
      auto id = static_cast<std::size_t>(id_raw);
      if (id_raw != static_cast<double>(id) || id >= spec.I)
        fail("malformed-manifest", rel + " has invalid item id");
      if (seen[id]) fail("malformed-manifest", "duplicate item id in shards");
      seen[id] = true;
      ++total_rows;
      auto row = spec.items.row(id);
      for (std::size_t k = 0; k < row_len; ++k)
        row[k] = parse_double(cells[k + 1]);
    }
  }
  if (total_rows != spec.I)
    fail("malformed-manifest",
         "shards hold " + std::to_string(total_rows) + " items, manifest says " +
             std::to_string(spec.I));
  validate(spec);
  return spec;
}

}  // namespace assign
