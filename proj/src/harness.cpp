#include "shuffledp/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include <json.hpp>

#include "shuffledp/errors.hpp"

namespace shuffledp {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kCsvHeader =
    "mechanism,eps,delta,n,B,rmse,mean_linf,mean_extra_messages,bits_per_user,calibration,"
    "optimistic,error";

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(what + ": not a number: '" + std::string(s) + "'");
  return v;
}

std::uint64_t parse_u64(std::string_view s, const std::string& what) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(what + ": not a count: '" + std::string(s) + "'");
  return v;
}

std::string_view trimmed(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Keeps free-text fields CSV-safe: the table stays strictly comma-split.
std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string effective_task(const ExperimentConfig& c) {
  if (!c.task.empty()) return c.task;
  return c.B >= 2 ? "histogram" : "binary";
}

void validate_config(const ExperimentConfig& c) {
  std::string task = effective_task(c);
  if (task != "binary" && task != "histogram")
    throw ParseError("config: task must be 'binary' or 'histogram'");
  if (c.mechanisms.empty()) throw ParseError("config: mechanisms must be non-empty");
  if (c.eps_grid.empty() || c.delta_grid.empty())
    throw ParseError("config: eps_grid and delta_grid must be non-empty");
  if (c.n < 1) throw ParseError("config: n must be >= 1");
  if (task == "histogram" && c.B < 2) throw ParseError("config: histogram task needs B >= 2");
  if (task == "binary" && c.B > 1)
    throw ParseError("config: binary task takes B = 1 (omit B or set task)");
  if (c.trials < 1) throw ParseError("config: trials must be >= 1");
  if (!(c.gamma > 0.0 && c.gamma <= 0.5)) throw ParseError("config: gamma must be in (0, 1/2]");
  if (!(c.factor >= 1.0)) throw ParseError("config: factor must be >= 1");
  if (c.sensitivity < 1) throw ParseError("config: sensitivity must be >= 1");
  if (c.format != "csv" && c.format != "json")
    throw ParseError("config: format must be 'csv' or 'json'");
  for (const std::string& m : c.mechanisms) mechanism_from_name(m);  // throws on typos
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config: top level must be a JSON object");

  ExperimentConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const ordered_json& v = it.value();
      if (k == "task") c.task = v.get<std::string>();
      else if (k == "mechanisms") c.mechanisms = v.get<std::vector<std::string>>();
      else if (k == "eps_grid") c.eps_grid = v.get<std::vector<double>>();
      else if (k == "delta_grid") c.delta_grid = v.get<std::vector<double>>();
      else if (k == "n") c.n = v.get<std::uint64_t>();
      else if (k == "B") c.B = v.get<std::uint64_t>();
      else if (k == "trials") c.trials = v.get<std::uint64_t>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "gamma") c.gamma = v.get<double>();
      else if (k == "factor") c.factor = v.get<double>();
      else if (k == "sensitivity") c.sensitivity = v.get<long long>();
      else if (k == "dataset") c.dataset = v.get<std::string>();
      else if (k == "output") c.output = v.get<std::string>();
      else if (k == "format") c.format = v.get<std::string>();
      else if (k == "bucketization") {
        BucketizationSpec spec;
        for (auto bit = v.begin(); bit != v.end(); ++bit) {
          const std::string& bk = bit.key();
          if (bk == "range") spec.range = bit.value().get<long long>();
          else if (bk == "overflow_bucket") spec.overflow_bucket = bit.value().get<bool>();
          else if (bk == "buckets") {
            // Redundant with B; accepted but must agree.
            if (bit.value().get<std::uint64_t>() != c.B)
              throw ParseError("config: bucketization.buckets disagrees with B");
          } else {
            throw ParseError("config: unknown bucketization key '" + bk + "'");
          }
        }
        if (spec.range < 1) throw ParseError("config: bucketization.range must be >= 1");
        c.bucketization = spec;
      } else {
        throw ParseError("config: unknown key '" + k + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) { return config_from_json(read_file(path)); }

std::vector<int> load_dataset(const std::string& path, std::uint64_t B,
                              const std::optional<BucketizationSpec>& bucketization,
                              long long sensitivity) {
  if (bucketization && B < 2)
    throw ParseError(path + ": bucketization requires a histogram task (B >= 2)");
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::vector<int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trimmed(line);
    if (sv.empty()) continue;
    long long v = 0;
    auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    std::string where = path + ":" + std::to_string(lineno);
    if (res.ec != std::errc() || res.ptr != sv.data() + sv.size())
      throw ParseError(where + ": not an integer: '" + std::string(sv) + "'");
    if (v < 0) throw ParseError(where + ": negative value");

    long long bucket;
    if (bucketization) {
      const BucketizationSpec& spec = *bucketization;
      if (v >= spec.range) {
        if (!spec.overflow_bucket) throw ParseError(where + ": value beyond bucketized range");
        bucket = static_cast<long long>(B);
      } else {
        // floor(v / (range / (B-1))) in exact integer arithmetic.
        unsigned __int128 num =
            static_cast<unsigned __int128>(v) * static_cast<unsigned __int128>(B - 1);
        bucket = 1 + static_cast<long long>(num / static_cast<unsigned __int128>(spec.range));
      }
    } else if (B >= 2) {
      if (v < 1 || v > static_cast<long long>(B))
        throw ParseError(where + ": bucket index outside [1, " + std::to_string(B) + "]");
      bucket = v;
    } else {
      if (v > sensitivity)
        throw ParseError(where + ": summation value above " + std::to_string(sensitivity));
      bucket = v;
    }
    out.push_back(static_cast<int>(bucket));
  }
  if (out.empty()) throw ParseError(path + ": no data lines");
  return out;
}

std::vector<int> synth_dataset(const std::string& spec, std::uint64_t n, std::uint64_t B,
                               std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("synth_dataset: n must be >= 1");
  std::string name = spec;
  std::string arg;
  if (auto colon = spec.find(':'); colon != std::string::npos) {
    name = spec.substr(0, colon);
    arg = spec.substr(colon + 1);
  }
  const bool hist = B >= 2;
  Rng rng(seed);
  std::vector<int> out(n);

  if (name == "uniform") {
    for (int& x : out) x = hist ? static_cast<int>(1 + rng.below(B)) : static_cast<int>(rng.below(2));
  } else if (name == "ones") {
    std::fill(out.begin(), out.end(), 1);
  } else if (name == "zeros") {
    if (hist) throw std::invalid_argument("synth_dataset: 'zeros' is for the binary task");
    std::fill(out.begin(), out.end(), 0);
  } else if (name == "point") {
    long long j = static_cast<long long>(parse_double(arg, "synth point"));
    long long hi = hist ? static_cast<long long>(B) : 1;
    if (j < (hist ? 1 : 0) || j > hi)
      throw std::invalid_argument("synth_dataset: point value out of range");
    std::fill(out.begin(), out.end(), static_cast<int>(j));
  } else if (name == "bernoulli") {
    if (hist) throw std::invalid_argument("synth_dataset: 'bernoulli' is for the binary task");
    double q = parse_double(arg, "synth bernoulli");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("synth_dataset: bernoulli q in [0,1]");
    for (int& x : out) x = rng.uniform() < q ? 1 : 0;
  } else if (name == "zipf") {
    if (!hist) throw std::invalid_argument("synth_dataset: 'zipf' is for the histogram task");
    double s = arg.empty() ? 1.0 : parse_double(arg, "synth zipf");
    std::vector<double> cdf(B);
    double acc = 0.0;
    for (std::uint64_t j = 1; j <= B; ++j) {
      acc += std::pow(static_cast<double>(j), -s);
      cdf[j - 1] = acc;
    }
    for (int& x : out) {
      double u = rng.uniform() * acc;
      std::size_t k = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
      x = static_cast<int>(std::min<std::size_t>(k, B - 1) + 1);
    }
  } else {
    throw std::invalid_argument("synth_dataset: unknown spec '" + spec + "'");
  }
  return out;
}

MechanismParams calibrate_for(const std::string& mechanism, double eps, double delta, double gamma,
                              double factor, long long sensitivity, std::uint64_t n,
                              std::uint64_t B, bool histogram) {
  Mechanism m = mechanism_from_name(mechanism);
  MechanismParams params;
  switch (m) {
    case Mechanism::poisson:
      params.mechanism = m;
      params.lambda = histogram ? calibrate_poisson_histogram(eps, delta)
                                : calibrate_poisson(eps, delta, sensitivity);
      params.sensitivity = histogram ? 1 : sensitivity;
      break;
    case Mechanism::nb: {
      if (histogram)
        throw std::invalid_argument("nb mechanism calibrates the binary summation task only");
      auto [r, p] = nb_params_closed_form(eps, delta, sensitivity);
      params.mechanism = m;
      params.nb_r = r;
      params.nb_p = p;
      params.sensitivity = sensitivity;
      break;
    }
    case Mechanism::correlated:
      params = histogram ? histogram_params(eps, delta, gamma, B)
                         : calibrate_correlated(eps, delta, n, factor);
      break;
    case Mechanism::binary_rr:
      if (histogram)
        throw std::invalid_argument("binary-rr runs the binary task only (use b-rr)");
      params = calibrate_baseline(m, eps, delta, n, 2);
      break;
    case Mechanism::b_rr:
    case Mechanism::rappor:
    case Mechanism::frag_rappor:
      if (!histogram)
        throw std::invalid_argument(mechanism + " runs the histogram task only");
      params = calibrate_baseline(m, eps, delta, n, B);
      break;
    case Mechanism::central_dlap:
      params.mechanism = m;
      params.eps1 = histogram ? 0.5 * eps : eps;
      break;
  }
  params.epsilon = eps;
  params.delta = delta;
  params.n = n;
  if (histogram) params.B = B;
  return params;
}

std::vector<MetricsRow> run_sweep(const ExperimentConfig& config, std::uint64_t scale) {
  validate_config(config);
  if (scale < 1) throw std::invalid_argument("run_sweep: scale must be >= 1");
  const bool hist = effective_task(config) == "histogram";
  const std::uint64_t n_eff = std::max<std::uint64_t>(1, config.n / scale);
  const std::uint64_t data_B = hist ? config.B : 1;

  std::vector<int> inputs;
  if (config.dataset.rfind("synth:", 0) == 0) {
    inputs = synth_dataset(config.dataset.substr(6), n_eff, data_B,
                           derive_seed(config.seed, 1, 0));
  } else {
    inputs = load_dataset(config.dataset, data_B, config.bucketization, config.sensitivity);
    if (inputs.size() < n_eff)
      throw ParseError(config.dataset + ": dataset smaller than n (" +
                       std::to_string(inputs.size()) + " < " + std::to_string(n_eff) + ")");
    inputs.resize(n_eff);
  }

  std::vector<std::string> mechanisms = config.mechanisms;
  if (std::find(mechanisms.begin(), mechanisms.end(), "central-dlap") == mechanisms.end())
    mechanisms.push_back("central-dlap");

  std::vector<MetricsRow> rows;
  rows.reserve(config.eps_grid.size() * config.delta_grid.size() * mechanisms.size());
  std::uint64_t idx = 0;
  for (double eps : config.eps_grid) {
    for (double delta : config.delta_grid) {
      for (const std::string& name : mechanisms) {
        MetricsRow row;
        row.mechanism = name;
        row.eps = eps;
        row.delta = delta;
        row.n = n_eff;
        row.B = data_B;
        try {
          MechanismParams params = calibrate_for(name, eps, delta, config.gamma, config.factor,
                                                 config.sensitivity, n_eff, config.B, hist);
          ExperimentAggregate agg = run_experiment(inputs, params, config.trials,
                                                   derive_seed(config.seed, 2, idx));
          row.rmse = agg.rmse;
          row.mean_linf = agg.mean_linf;
          row.mean_extra_messages = agg.mean_extra_messages;
          row.bits_per_user = agg.mean_bits / static_cast<double>(n_eff);
          row.calibration = params.calibration_summary();
          row.optimistic = params.optimistic;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        rows.push_back(std::move(row));
        ++idx;
      }
    }
  }
  return rows;
}

std::string rows_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const MetricsRow& r : rows) {
    out += csv_safe(r.mechanism);
    out += ',';
    out += fmt_double(r.eps);
    out += ',';
    out += fmt_double(r.delta);
    out += ',';
    out += std::to_string(r.n);
    out += ',';
    out += std::to_string(r.B);
    out += ',';
    out += fmt_double(r.rmse);
    out += ',';
    out += fmt_double(r.mean_linf);
    out += ',';
    out += fmt_double(r.mean_extra_messages);
    out += ',';
    out += fmt_double(r.bits_per_user);
    out += ',';
    out += csv_safe(r.calibration);
    out += ',';
    out += r.optimistic ? "true" : "false";
    out += ',';
    out += csv_safe(r.error);
    out += '\n';
  }
  return out;
}

std::vector<MetricsRow> rows_from_csv(const std::string& text) {
  std::vector<std::string_view> lines;
  std::string_view sv = text;
  while (!sv.empty()) {
    std::size_t nl = sv.find('\n');
    if (nl == std::string_view::npos) {
      lines.push_back(sv);
      break;
    }
    lines.push_back(sv.substr(0, nl));
    sv.remove_prefix(nl + 1);
  }
  if (lines.empty() || lines[0] != kCsvHeader)
    throw ParseError("metrics csv: missing or unexpected header row");

  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest = lines[i];
    while (true) {
      std::size_t c = rest.find(',');
      if (c == std::string_view::npos) {
        f.push_back(rest);
        break;
      }
      f.push_back(rest.substr(0, c));
      rest.remove_prefix(c + 1);
    }
    std::string where = "metrics csv row " + std::to_string(i);
    if (f.size() != 12) throw ParseError(where + ": expected 12 fields");
    MetricsRow r;
    r.mechanism = std::string(f[0]);
    r.eps = parse_double(f[1], where);
    r.delta = parse_double(f[2], where);
    r.n = parse_u64(f[3], where);
    r.B = parse_u64(f[4], where);
    r.rmse = parse_double(f[5], where);
    r.mean_linf = parse_double(f[6], where);
    r.mean_extra_messages = parse_double(f[7], where);
    r.bits_per_user = parse_double(f[8], where);
    r.calibration = std::string(f[9]);
    if (f[10] == "true") r.optimistic = true;
    else if (f[10] == "false") r.optimistic = false;
    else throw ParseError(where + ": optimistic must be true or false");
    r.error = std::string(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string rows_to_json(const std::vector<MetricsRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const MetricsRow& r : rows) {
    ordered_json o;
    o["mechanism"] = r.mechanism;
    o["eps"] = r.eps;
    o["delta"] = r.delta;
    o["n"] = r.n;
    o["B"] = r.B;
    o["rmse"] = r.rmse;
    o["mean_linf"] = r.mean_linf;
    o["mean_extra_messages"] = r.mean_extra_messages;
    o["bits_per_user"] = r.bits_per_user;
    o["calibration"] = r.calibration;
    o["optimistic"] = r.optimistic;
    o["error"] = r.error;
    arr.push_back(std::move(o));
  }
  return arr.dump(2) + "\n";
}

}  // namespace shuffledp
