// Copyright 2026 The har-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HARAUDIT_ERRORS_HPP_
#define HARAUDIT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace haraudit {

// Base class for every error raised by this library. Anything escaping a
// public entry point that is not a haraudit::Error is a bug.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument values (bad shapes requested, infeasible profile counts,
// out-of-range fractions, ...).
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

// Invalid model or experiment configuration (kernel longer than window,
// empty branch, non-positive sizes, malformed manifest config blocks).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Tensor/shape mismatches at model boundaries (window channel count does not
// match the branch partition the model was built for, ...).
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Raised by dataset parsers. The code pins down the failure class so tests
// and callers do not have to match on message text.
class IngestError : public Error {
 public:
  enum class Code {
    missing_meta,      // metadata file absent or unreadable
    empty_dataset,     // root contains no recordings
    channel_mismatch,  // recording channels disagree with the dataset
    unknown_label,     // activity name/id not in the class list
    unknown_subject,   // recording references a subject without metadata
    bad_format,        // unparsable CSV/JSON content
  };

  IngestError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Raised by statistical tests on degenerate input.
class StatError : public Error {
 public:
  enum class Code {
    degenerate_table,  // a row or column marginal is zero
  };

  StatError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Raised when a requested heterogeneity level has no realization in the pool.
class EnumerationError : public Error {
 public:
  enum class Code {
    infeasible_hm,
  };

  EnumerationError(Code code, const std::string& msg)
      : Error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Raised when a split manifest fails re-verification against the pool.
class ManifestError : public Error {
 public:
  enum class Code {
    unknown_subject,  // train list references an id outside the pool
    hm_mismatch,      // declared label disagrees with the recomputed one
    bad_format,       // malformed JSON or missing fields
  };

  ManifestError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Raised by the training loop.
class TrainError : public Error {
 public:
  enum class Code {
    degenerate_labels,  // fewer than two classes present in the training set
  };

  TrainError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Raised by evaluation metrics on empty input.
class MetricError : public Error {
 public:
  enum class Code {
    no_samples,
  };

  MetricError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Raised by report generation when there is nothing to aggregate.
class ReportError : public Error {
 public:
  enum class Code {
    empty,
  };

  ReportError(Code code, const std::string& msg) : Error(msg), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

}  // namespace haraudit

#endif  // HARAUDIT_ERRORS_HPP_
