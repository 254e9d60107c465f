#pragma once

// Fitness evaluation: request/response types shared with external trainers,
// the deterministic analytic surrogate, and a genome-keyed result cache.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "genome_codec.hpp"
#include "log.hpp"
#include "metrics.hpp"

namespace cellspace {

struct EvaluationRequest {
  std::uint64_t id = 0;
  DigitGenome genome;
  Json architecture;  // ArchitectureExport document
  TrainingBudget budget;
};

struct EvaluationResult {
  enum class Status { ok, error };
  std::uint64_t id = 0;
  Status status = Status::error;
  double accuracy = 0.0;
  std::string message;

  bool ok() const { return status == Status::ok; }
  static EvaluationResult success(std::uint64_t id, double accuracy) {
    return {id, Status::ok, accuracy, {}};
  }
  static EvaluationResult failure(std::uint64_t id, std::string message) {
    return {id, Status::error, 0.0, std::move(message)};
  }
  friend bool operator==(const EvaluationResult&, const EvaluationResult&) = default;
};

/// Fatal evaluator problems (cannot spawn, etc). Per-request failures are
/// reported in-band as Status::error instead.
class EvaluatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(std::optional<std::uint64_t> id, const std::string& what)
      : std::runtime_error(what), id_(id) {}
  std::optional<std::uint64_t> id() const { return id_; }

 private:
  std::optional<std::uint64_t> id_;
};

/// Returns exactly one result per request, in request order.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::vector<EvaluationResult> evaluate(std::span<const EvaluationRequest> batch) = 0;
};

// ---------------------------------------------------------------------------
// Wire format: one compact JSON document per line.

inline Json to_wire(const EvaluationRequest& r) {
  return Json{{"id", r.id},
              {"genome", r.genome.digits},
              {"architecture", r.architecture},
              {"budget",
               {{"epochs", r.budget.epochs},
                {"batch_size", r.budget.batch_size},
                {"dropout", r.budget.dropout}}}};
}

inline Json to_wire(const EvaluationResult& r) {
  Json j{{"id", r.id}, {"status", r.ok() ? "ok" : "error"}};
  if (r.ok()) j["accuracy"] = r.accuracy;
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

inline EvaluationRequest request_from_wire(const Json& j) {
  EvaluationRequest r;
  r.id = j.at("id").get<std::uint64_t>();
  r.genome.digits = j.at("genome").get<std::vector<std::uint32_t>>();
  r.architecture = j.at("architecture");
  const auto& b = j.at("budget");
  r.budget.epochs = b.at("epochs").get<int>();
  r.budget.batch_size = b.at("batch_size").get<int>();
  r.budget.dropout = b.at("dropout").get<double>();
  return r;
}

/// Parses one response line. Throws ProtocolError carrying the id when one
/// could be recovered.
inline EvaluationResult parse_result_line(const std::string& line) {
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error&) {
    static const std::regex id_re(R"re("id"\s*:\s*([0-9]+))re");
    std::smatch m;
    std::optional<std::uint64_t> id;
    if (std::regex_search(line, m, id_re)) {
      try {
        id = std::stoull(m[1].str());
      } catch (const std::exception&) {
      }
    }
    throw ProtocolError(id, "malformed response line: " + line.substr(0, 200));
  }
  std::optional<std::uint64_t> id;
  if (j.is_object()) {
    if (auto it = j.find("id"); it != j.end() && it->is_number_unsigned())
      id = it->get<std::uint64_t>();
  }
  if (!id) throw ProtocolError(std::nullopt, "response without integer id");
  const auto status = j.find("status");
  if (status == j.end() || !status->is_string())
    throw ProtocolError(id, "response without status");
  EvaluationResult r;
  r.id = *id;
  if (auto m = j.find("message"); m != j.end() && m->is_string()) r.message = m->get<std::string>();
  if (*status == "ok") {
    const auto acc = j.find("accuracy");
    if (acc == j.end() || !acc->is_number()) throw ProtocolError(id, "ok response without accuracy");
    r.accuracy = acc->get<double>();
    if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0))
      throw ProtocolError(id, "accuracy outside [0, 1]");
    r.status = EvaluationResult::Status::ok;
  } else if (*status == "error") {
    r.status = EvaluationResult::Status::error;
  } else {
    throw ProtocolError(id, "unknown status " + status->dump());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Surrogate.

/// Deterministic stand-in for training. With q = params / 1e6 and
/// J = genome_hash / 2^64:  accuracy = clamp(0.99 q / (q + 1) - 0.02 J, 0, 1).
/// More parameters always help, so error and size genuinely trade off.
inline double surrogate_accuracy(std::uint64_t params, std::uint64_t hash) {
  const double q = static_cast<double>(params) / 1e6;
  const double jitter = static_cast<double>(hash) * 0x1.0p-64;
  const double acc = 0.99 * q / (q + 1.0) - 0.02 * jitter;
  return std::clamp(acc, 0.0, 1.0);
}

inline double surrogate_evaluate(const DigitGenome& genome, const ArchGraph& graph) {
  return surrogate_accuracy(total_param_count(graph), genome_hash(genome));
}

/// Reads param_count from the request's architecture export.
class SurrogateEvaluator final : public Evaluator {
 public:
  std::vector<EvaluationResult> evaluate(std::span<const EvaluationRequest> batch) override {
    std::vector<EvaluationResult> out;
    out.reserve(batch.size());
    for (const auto& r : batch) {
      const auto it = r.architecture.find("param_count");
      if (it == r.architecture.end() || !it->is_number_unsigned()) {
        out.push_back(EvaluationResult::failure(r.id, "architecture has no param_count"));
        continue;
      }
      out.push_back(EvaluationResult::success(
          r.id, surrogate_accuracy(it->get<std::uint64_t>(), genome_hash(r.genome))));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Cache.

/// Thread-safe genome -> result map. Buckets by hash and compares full digit
/// vectors, so hash collisions never alias. Optionally persisted as an
/// append-only NDJSON file reloaded on attach.
class EvaluationCache {
 public:
  using HashFn = std::function<std::uint64_t(const DigitGenome&)>;

  explicit EvaluationCache(HashFn hash = genome_hash) : hash_(std::move(hash)) {}

  std::optional<EvaluationResult> find(const DigitGenome& g) const {
    std::lock_guard lock(mu_);
    const auto it = buckets_.find(hash_(g));
    if (it == buckets_.end()) return std::nullopt;
    for (const auto& e : it->second)
      if (e.genome == g) return e.result;
    return std::nullopt;
  }

  void insert(const DigitGenome& g, const EvaluationResult& r) {
    std::lock_guard lock(mu_);
    if (insert_locked(g, r) && out_.is_open()) {
      out_ << entry_json(g, r).dump() << '\n';
      out_.flush();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return size_;
  }

  /// Loads every well-formed line of `path` (skipping corrupt ones with a
  /// warning), then appends future inserts to it.
  void attach_file(const std::string& path) {
    std::lock_guard lock(mu_);
    {
      std::ifstream in(path);
      std::string line;
      std::size_t lineno = 0;
      while (in && std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
          const auto j = Json::parse(line);
          DigitGenome g{j.at("digits").get<std::vector<std::uint32_t>>()};
          auto r = parse_result_line(j.at("result").dump());
          insert_locked(g, r);
        } catch (const std::exception& e) {
          log::warn("cache " + path + ":" + std::to_string(lineno) + ": skipped corrupt line (" +
                    e.what() + ")");
        }
      }
    }
    out_.open(path, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open cache file " + path + " for append");
  }

 private:
  struct Entry {
    DigitGenome genome;
    EvaluationResult result;
  };

  static Json entry_json(const DigitGenome& g, const EvaluationResult& r) {
    return Json{{"digits", g.digits}, {"result", to_wire(r)}};
  }

  bool insert_locked(const DigitGenome& g, const EvaluationResult& r) {
    auto& bucket = buckets_[hash_(g)];
    for (auto& e : bucket) {
      if (e.genome == g) {
        e.result = r;
        return false;
      }
    }
    bucket.push_back({g, r});
    ++size_;
    return true;
  }

  HashFn hash_;
  mutable std::mutex mu_;
  std::unordered_map<std::uint64_t, std::vector<Entry>> buckets_;
  std::size_t size_ = 0;
  std::ofstream out_;
};

/// Serves cache hits and forwards misses (deduplicated within the batch) to
/// the inner evaluator. Only ok results are stored, so failed or timed-out
/// evaluations are retried next time they come up.
class CachedEvaluator final : public Evaluator {
 public:
  CachedEvaluator(Evaluator& inner, EvaluationCache& cache) : inner_(inner), cache_(cache) {}

  std::vector<EvaluationResult> evaluate(std::span<const EvaluationRequest> batch) override {
    std::vector<EvaluationResult> out(batch.size());
    std::vector<EvaluationRequest> misses;
    std::vector<std::vector<std::size_t>> miss_slots;
    std::map<DigitGenome, std::size_t> pending;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (auto hit = cache_.find(batch[i].genome)) {
        out[i] = *hit;
        out[i].id = batch[i].id;
        ++hits_;
        continue;
      }
      const auto [it, fresh] = pending.try_emplace(batch[i].genome, misses.size());
      if (fresh) {
        misses.push_back(batch[i]);
        miss_slots.push_back({i});
      } else {
        miss_slots[it->second].push_back(i);
      }
    }
    if (!misses.empty()) {
      const auto results = inner_.evaluate(misses);
      inner_requests_ += misses.size();
      for (std::size_t m = 0; m < misses.size(); ++m) {
        if (results[m].ok()) cache_.insert(misses[m].genome, results[m]);
        for (auto slot : miss_slots[m]) {
          out[slot] = results[m];
          out[slot].id = batch[slot].id;
        }
      }
    }
    return out;
  }

  std::uint64_t inner_requests() const { return inner_requests_; }
  std::uint64_t hits() const { return hits_; }

 private:
  Evaluator& inner_;
  EvaluationCache& cache_;
  std::uint64_t inner_requests_ = 0;
  std::uint64_t hits_ = 0;
};

}  // namespace cellspace
