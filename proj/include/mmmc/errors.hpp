#ifndef MMMC_ERRORS_HPP
#define MMMC_ERRORS_HPP

#include <cstddef>
#include <exception>
#include <optional>
#include <string>
#include <utility>

namespace mmmc {

/// Base of every error raised by the library.
///
/// Errors raised inside the sample loop are annotated with the failing stage
/// ("assembly", "factorization", ...) and the sample index before they leave
/// the solver, so the CLI can report where a run broke.
class Error : public std::exception {
public:
  explicit Error(std::string message) : message_(std::move(message)) { compose(); }

  const char* what() const noexcept override { return full_.c_str(); }

  const std::string& message() const noexcept { return message_; }
  const std::string& stage() const noexcept { return stage_; }
  std::optional<std::size_t> sample() const noexcept { return sample_; }

  void annotate(std::string stage, std::optional<std::size_t> sample) {
    if (stage_.empty()) stage_ = std::move(stage);
    if (!sample_) sample_ = sample;
    compose();
  }

private:
  void compose() {
    full_.clear();
    if (!stage_.empty()) full_ += "[" + stage_ + "] ";
    if (sample_) full_ += "sample " + std::to_string(*sample_) + ": ";
    full_ += message_;
  }

  std::string message_;
  std::string stage_;
  std::optional<std::size_t> sample_;
  std::string full_;
};

#define MMMC_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                    \
  public:                                                        \
    explicit Name(std::string m) : Error(std::move(m)) {}        \
  }

MMMC_DEFINE_ERROR(InvalidMesh);
MMMC_DEFINE_ERROR(ShapeError);
MMMC_DEFINE_ERROR(CoercivityViolation);
MMMC_DEFINE_ERROR(FieldEvaluationError);
MMMC_DEFINE_ERROR(NotPositiveDefinite);
MMMC_DEFINE_ERROR(KernelError);
MMMC_DEFINE_ERROR(DegenerateField);
MMMC_DEFINE_ERROR(UnsupportedSpec);
MMMC_DEFINE_ERROR(InvalidData);
MMMC_DEFINE_ERROR(ConfigError);

#undef MMMC_DEFINE_ERROR

}  // namespace mmmc

#endif  // MMMC_ERRORS_HPP
