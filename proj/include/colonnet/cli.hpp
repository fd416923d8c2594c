#pragma once

namespace colonnet {

/// Entry point for the `colonnet` command-line tool (synth / train /
/// evaluate / predict). Returns the process exit code: 0 success,
/// 1 runtime failure, 2 configuration error.
int run_cli(int argc, const char* const* argv);

}  // namespace colonnet
