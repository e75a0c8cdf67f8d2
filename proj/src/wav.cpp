#include "magphase/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace magphase {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw Error(ErrorCode::IoError, path.string() + ": " + what);
}

}  // namespace

TimeSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail(path, "not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  for (std::size_t pos = 12; pos + 8 <= bytes.size();) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Tolerate a truncated final data chunk.
      if (std::memcmp(chunk, "data", 4) != 0) fail(path, "truncated chunk");
    }
    const std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) fail(path, "short fmt chunk");
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == 0xFFFE && avail >= 26) format = le16(chunk + 32);  // extensible subformat
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || !data) fail(path, "missing fmt or data chunk");
  if (channels != 1) fail(path, "only mono files are supported");

  SampleArray samples;
  if (format == 3 && bits == 32) {
    samples.resize(static_cast<Index>(data_size / 4));
    for (Index i = 0; i < samples.size(); ++i) {
      const std::uint32_t raw = le32(data + 4 * i);
      float f;
      std::memcpy(&f, &raw, sizeof f);
      samples[i] = f;
    }
  } else if (format == 1 && bits == 16) {
    samples.resize(static_cast<Index>(data_size / 2));
    for (Index i = 0; i < samples.size(); ++i) {
      samples[i] = static_cast<std::int16_t>(le16(data + 2 * i)) / 32768.0;
    }
  } else {
    fail(path, "unsupported sample format (need 32-bit float or 16-bit PCM)");
  }
  try {
    return TimeSignal(std::move(samples), static_cast<int>(rate));
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

void write_wav(const std::filesystem::path& path, const TimeSignal& signal) {
  const auto n = static_cast<std::uint32_t>(signal.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 4 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + 4 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 3);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(signal.sample_rate()));
  put32(out, static_cast<std::uint32_t>(signal.sample_rate()) * 4);
  put16(out, 4);
  put16(out, 32);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, 4 * n);
  for (Index i = 0; i < signal.size(); ++i) {
    const float f = static_cast<float>(signal[i]);
    std::uint32_t raw;
    std::memcpy(&raw, &f, sizeof raw);
    put32(out, raw);
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) fail(path, "cannot open for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) fail(path, "write failed");
}

}  // namespace magphase
