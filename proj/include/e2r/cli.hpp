#pragma once

namespace e2r::cli {

/// Process exit statuses.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,     // bad flags or config file
  kTrack = 2,     // track validation or generation
  kScenario = 3,  // scenario enumeration or collection
  kTrain = 4,     // dataset loading or training
  kEval = 5,      // checkpoint loading, evaluation or rendering
};

int run(int argc, char** argv);

}  // namespace e2r::cli
