#pragma once

#include <stdexcept>
#include <string>

namespace dfree {

// Base class for every error raised by the library. Callers that only care
// about "something failed" can catch this; tests match the concrete types.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DFREE_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

// simulator
DFREE_DEFINE_ERROR(InvalidEpisode)
DFREE_DEFINE_ERROR(EpisodeFinished)
DFREE_DEFINE_ERROR(UnknownAction)
// scenes / persistence
DFREE_DEFINE_ERROR(GenerationFailed)
DFREE_DEFINE_ERROR(IOFailure)
DFREE_DEFINE_ERROR(FormatVersionMismatch)
// autodiff / training
DFREE_DEFINE_ERROR(ShapeMismatch)
DFREE_DEFINE_ERROR(NonFiniteGradient)
DFREE_DEFINE_ERROR(NonFiniteLoss)
DFREE_DEFINE_ERROR(CheckpointMismatch)
// metrics / config
DFREE_DEFINE_ERROR(EmptyInput)
DFREE_DEFINE_ERROR(ConfigError)

#undef DFREE_DEFINE_ERROR

}  // namespace dfree
