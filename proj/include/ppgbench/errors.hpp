#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ppgbench {

/// Raised when an input violates a documented contract (bad config, invalid
/// bundle, malformed file). The CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structured bundle/checkpoint load failure. `record()` names the offending
/// record or file entry when one is known.
class LoadError : public ValidationError {
public:
    LoadError(const std::string& what, std::string record = {})
        : ValidationError(record.empty() ? what : what + " (record: " + record + ")"),
          record_(std::move(record)) {}

    const std::string& record() const noexcept { return record_; }

private:
    std::string record_;
};

/// Failure during a numerical run (non-finite loss, training abort). Exit code 2.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The loss of a forward pass was NaN or infinite. `batch_index` identifies
/// the batch within whatever loop produced it.
class NonFiniteLoss : public RuntimeFailure {
public:
    explicit NonFiniteLoss(std::size_t batch_index, const std::string& context = {})
        : RuntimeFailure("non-finite loss at batch " + std::to_string(batch_index) +
                         (context.empty() ? "" : " (" + context + ")")),
          batch_index_(batch_index) {}

    std::size_t batch_index() const noexcept { return batch_index_; }

private:
    std::size_t batch_index_;
};

} // namespace ppgbench
