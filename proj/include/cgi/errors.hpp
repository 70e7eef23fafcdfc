#pragma once

#include <stdexcept>
#include <string>

namespace cgi {

// Base class for all framework errors. Each failure mode named in a module
// contract gets its own type so callers can catch narrowly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CGI_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

// trajectory-core
CGI_DEFINE_ERROR(AppendAfterDone);
CGI_DEFINE_ERROR(IndexGap);
CGI_DEFINE_ERROR(OutOfRange);
CGI_DEFINE_ERROR(EmptyTrajectory);

// craftsim-env
CGI_DEFINE_ERROR(UnparsableCommand);
CGI_DEFINE_ERROR(SteppedAfterDone);
CGI_DEFINE_ERROR(GenerationOverflow);
CGI_DEFINE_ERROR(UnsolvableTask);

// env-bridge
CGI_DEFINE_ERROR(VersionMismatch);
CGI_DEFINE_ERROR(ConnectTimeout);
CGI_DEFINE_ERROR(ProtocolError);
CGI_DEFINE_ERROR(EpisodeNotReset);

// policy-gateway
CGI_DEFINE_ERROR(UnknownEnvPrompt);
CGI_DEFINE_ERROR(BackendUnavailable);
CGI_DEFINE_ERROR(NoCritiques);

// critic-engine
CGI_DEFINE_ERROR(MissingPlaceholder);
CGI_DEFINE_ERROR(MissingGrade);

// cgi-orchestrator
CGI_DEFINE_ERROR(HookFailed);

// dataset-forge
CGI_DEFINE_ERROR(RewardFilterViolation);
CGI_DEFINE_ERROR(MissingCritiques);
CGI_DEFINE_ERROR(EmptyPool);

// eval-metrics
CGI_DEFINE_ERROR(NoEpisodes);
CGI_DEFINE_ERROR(MissingCandidates);
CGI_DEFINE_ERROR(MissingOracleLength);

#undef CGI_DEFINE_ERROR

}  // namespace cgi
