#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cacaotk {

// Base class for all library errors. The CLI maps subclasses onto exit codes:
// usage problems -> 2, backend problems -> 3, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- cacao_model ----

class MalformedJson : public Error {
 public:
  MalformedJson(const std::string& msg, std::size_t byte_pos)
      : Error(msg), byte_pos(byte_pos) {}
  std::size_t byte_pos;
};

class NotAPlaybook : public Error {
 public:
  using Error::Error;
};

// Construction-time invariant violation (kind/field exclusivity etc.).
class InvalidDocument : public Error {
 public:
  using Error::Error;
};

class DanglingReference : public Error {
 public:
  DanglingReference(const std::string& msg, std::string step_id)
      : Error(msg), step_id(std::move(step_id)) {}
  std::string step_id;
};

// ---- schema_validator ----

class EmptyDataset : public Error {
 public:
  using Error::Error;
};

// ---- metrics ----

class EmptyFieldSet : public Error {
 public:
  using Error::Error;
};

// ---- prompt_engine ----

class UnknownStepKind : public Error {
 public:
  UnknownStepKind(const std::string& msg, std::string token)
      : Error(msg), token(std::move(token)) {}
  std::string token;
};

class ContextOverflow : public Error {
 public:
  ContextOverflow(const std::string& msg, int est_tokens, int window)
      : Error(msg), est_tokens(est_tokens), window(window) {}
  int est_tokens;
  int window;
};

class MissingPriorFragment : public Error {
 public:
  using Error::Error;
};

// ---- llm_backend ----

class BackendError : public Error {
 public:
  using Error::Error;
};

class ReplayMiss : public BackendError {
 public:
  ReplayMiss(const std::string& msg, std::string fingerprint)
      : BackendError(msg), fingerprint(std::move(fingerprint)) {}
  std::string fingerprint;
};

class RemoteError : public BackendError {
 public:
  RemoteError(const std::string& msg, int status, std::string body)
      : BackendError(msg), status(status), body(std::move(body)) {}
  int status;
  std::string body;
};

class Timeout : public BackendError {
 public:
  using BackendError::BackendError;
};

class CassetteCorrupt : public BackendError {
 public:
  using BackendError::BackendError;
};

class UnknownModelPrice : public Error {
 public:
  UnknownModelPrice(const std::string& msg, std::string model_id)
      : Error(msg), model_id(std::move(model_id)) {}
  std::string model_id;
};

// ---- orchestrator ----

class NoJsonFound : public Error {
 public:
  using Error::Error;
};

class FragmentUnparseable : public Error {
 public:
  FragmentUnparseable(const std::string& msg, std::string sub_task)
      : Error(msg), sub_task(std::move(sub_task)) {}
  std::string sub_task;
};

class SkeletonAttributeMismatch : public Error {
 public:
  SkeletonAttributeMismatch(const std::string& msg, std::string step_name)
      : Error(msg), step_name(std::move(step_name)) {}
  std::string step_name;
};

// ---- ingest ----

class UnreadableFile : public Error {
 public:
  using Error::Error;
};

class UnparseableContent : public Error {
 public:
  UnparseableContent(const std::string& msg, std::string format)
      : Error(msg), format(std::move(format)) {}
  std::string format;
};

class MissingFile : public Error {
 public:
  MissingFile(const std::string& msg, std::size_t entry_index)
      : Error(msg), entry_index(entry_index) {}
  std::size_t entry_index;
};

class MalformedManifest : public Error {
 public:
  using Error::Error;
};

}  // namespace cacaotk
