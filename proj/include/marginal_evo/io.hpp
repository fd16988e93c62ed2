#pragma once

// CSV and text artifacts, written to a temporary file and renamed into place.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "marginal_evo/errors.hpp"
#include "marginal_evo/evolution.hpp"
#include "marginal_evo/spectra.hpp"

namespace marginal_evo {

namespace fs = std::filesystem;

/// 17 significant digits, enough to round-trip any double.
inline std::string format_csv_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Writes `content` to `path` via `path.tmp` and an atomic rename. On failure
/// the temporary file is removed and IoError is thrown.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

/// Creates `dir` if needed and checks that files can be created in it.
inline void prepare_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream out(probe, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("output directory '" + dir.string() + "' is not writable");
  }
  fs::remove(probe, ec);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { append_row(header); }

  CsvWriter& cell(double x) { return cell(format_csv_double(x)); }
  CsvWriter& cell(long long x) { return cell(std::to_string(x)); }
  CsvWriter& cell(int x) { return cell(std::to_string(x)); }
  CsvWriter& cell(const std::string& s) {
    if (pending_) text_ += ',';
    text_ += s;
    ++pending_;
    if (pending_ == columns_) {
      text_ += '\n';
      pending_ = 0;
    }
    return *this;
  }

  const std::string& text() const { return text_; }
  void save(const fs::path& path) const {
    if (pending_) throw InvalidInput("incomplete CSV row");
    write_file_atomic(path, text_);
  }

 private:
  void append_row(const std::vector<std::string>& row) {
    for (const auto& c : row) cell(c);
  }

  std::size_t columns_;
  std::size_t pending_ = 0;
  std::string text_;
};

inline std::string_view to_string(PenaltyReason r) {
  switch (r) {
    case PenaltyReason::None: return "none";
    case PenaltyReason::Divergence: return "divergence";
    case PenaltyReason::EmptyBand: return "empty_band";
  }
  return "?";
}

/// One row per generation with the scalar GenerationRecord fields.
inline CsvWriter generations_csv(const std::vector<GenerationRecord>& records) {
  CsvWriter csv({"generation", "mean_sigma", "std_sigma", "best_sigma", "mean_lambda", "best_lambda", "best_total",
                 "mean_total", "best_relmse", "n_penalized", "beta", "mut_std"});
  for (const auto& r : records) {
    csv.cell(r.generation).cell(r.mean_sigma).cell(r.std_sigma).cell(r.best_sigma).cell(r.mean_lambda);
    csv.cell(r.best_lambda).cell(r.best_total).cell(r.mean_total).cell(r.best_relmse).cell(r.n_penalized);
    csv.cell(r.beta).cell(r.mut_std);
  }
  return csv;
}

/// One row per (generation, individual) with the full fitness breakdown.
inline CsvWriter population_csv(const std::vector<GenerationRecord>& records) {
  CsvWriter csv({"generation", "individual", "sigma_w2", "total", "spec_term", "lambda_term", "crit_term", "penalty",
                 "lambda", "relmse", "penalty_reason", "excluded_band_points"});
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.genotypes.size(); ++i) {
      const auto& f = r.fitness[i];
      csv.cell(r.generation).cell(static_cast<int>(i)).cell(r.genotypes[i].sigma_w2).cell(f.total);
      csv.cell(f.spec_term).cell(f.lambda_term).cell(f.crit_term).cell(f.penalty).cell(f.lambda_value);
      csv.cell(f.relmse).cell(std::string(to_string(f.penalty_reason))).cell(f.excluded_band_points);
    }
  }
  return csv;
}

inline CsvWriter spectrum_csv(const SpectrumPair& p) {
  CsvWriter csv({"omega", "x_sim", "x0", "x1", "x_th"});
  for (std::size_t i = 0; i < p.omega.size(); ++i) {
    csv.cell(p.omega[i]).cell(p.x_sim[i]).cell(p.x0[i]).cell(p.x1[i]).cell(p.x_th[i]);
  }
  return csv;
}

}  // namespace marginal_evo
