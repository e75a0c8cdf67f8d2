#pragma once

#include <filesystem>

#include "magphase/types.hpp"

namespace magphase {

/// Reads a mono RIFF/WAVE file holding 32-bit IEEE float or 16-bit PCM samples.
/// Throws Error(IoError) on unreadable or unsupported files.
TimeSignal read_wav(const std::filesystem::path& path);

/// Writes a mono 32-bit float WAVE file. Throws Error(IoError).
void write_wav(const std::filesystem::path& path, const TimeSignal& signal);

}  // namespace magphase
