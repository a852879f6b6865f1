#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gvl {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// dataset.json missing or unusable
class ManifestError : public Error {
public:
    using Error::Error;
};

// dataset contains no episodes
class EmptyDatasetError : public Error {
public:
    using Error::Error;
};

// episode metadata (instruction) missing or unreadable
class MetadataError : public Error {
public:
    using Error::Error;
};

// requested episode index is not part of the dataset handle
class NotFoundError : public Error {
public:
    using Error::Error;
};

// a domain-type invariant was violated (T < 2, duplicate timesteps, ...)
class InvariantError : public Error {
public:
    using Error::Error;
};

// a frame image could not be decoded
class FrameDecodeError : public Error {
public:
    FrameDecodeError(const std::string& what, std::int64_t episode_index, int timestep)
        : Error(what), episode_index(episode_index), timestep(timestep) {}
    explicit FrameDecodeError(const std::string& what) : Error(what) {}

    std::int64_t episode_index = -1;
    int timestep = -1;
};

// permutation / value-vector length or bijection mismatch
class PermutationError : public Error {
public:
    using Error::Error;
};

// invalid numeric input to a statistic (non-finite, too short, length mismatch)
class DomainError : public Error {
public:
    using Error::Error;
};

// operation requires a PredictionSet with status ok
class StatusError : public Error {
public:
    using Error::Error;
};

// endpoint failure that persisted past the retry budget
class TransientError : public Error {
public:
    using Error::Error;
};

// non-retryable endpoint failure (4xx other than 429)
class PermanentError : public Error {
public:
    using Error::Error;
};

// response envelope did not match the chat-completions schema
class ProtocolError : public Error {
public:
    using Error::Error;
};

// mock server could not bind its port
class BindError : public Error {
public:
    using Error::Error;
};

// file output failure
class IoError : public Error {
public:
    using Error::Error;
};

// quality band requested for a report with zero scored episodes
class UnclassifiableError : public Error {
public:
    using Error::Error;
};

} // namespace gvl
