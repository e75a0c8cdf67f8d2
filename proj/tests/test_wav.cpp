#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "magphase/scenes.hpp"
#include "magphase/wav.hpp"

using namespace magphase;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("magphase_wav_" + name);
}

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

TEST_CASE("float round trip") {
  SplitMix64 rng(3);
  SampleArray x(257);
  for (auto& v : x) v = static_cast<float>(rng.normal() * 0.3);
  const fs::path path = temp_file("rt.wav");
  write_wav(path, TimeSignal(x, 8000));
  const TimeSignal back = read_wav(path);
  CHECK(back.sample_rate() == 8000);
  CHECK((back.samples() == x).all());
  fs::remove(path);
}

TEST_CASE("16-bit PCM input") {
  const fs::path path = temp_file("pcm.wav");
  {
    std::ofstream out(path, std::ios::binary);
    const std::int16_t data[] = {0, 16384, -32768, 32767};
    out.write("RIFF", 4);
    put<std::uint32_t>(out, 36 + sizeof data);
    out.write("WAVEfmt ", 8);
    put<std::uint32_t>(out, 16);
    put<std::uint16_t>(out, 1);
    put<std::uint16_t>(out, 1);
    put<std::uint32_t>(out, 16000);
    put<std::uint32_t>(out, 32000);
    put<std::uint16_t>(out, 2);
    put<std::uint16_t>(out, 16);
    out.write("data", 4);
    put<std::uint32_t>(out, sizeof data);
    out.write(reinterpret_cast<const char*>(data), sizeof data);
  }
  const TimeSignal s = read_wav(path);
  REQUIRE(s.size() == 4);
  CHECK(s.samples()[0] == 0.0);
  CHECK(s.samples()[1] == 0.5);
  CHECK(s.samples()[2] == -1.0);
  fs::remove(path);
}

TEST_CASE("unreadable files") {
  auto code_of = [](const fs::path& p) {
    try {
      read_wav(p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::NonFinite;
  };
  CHECK(code_of(temp_file("does_not_exist.wav")) == ErrorCode::IoError);
  const fs::path junk = temp_file("junk.wav");
  std::ofstream(junk) << "definitely not a wave file";
  CHECK(code_of(junk) == ErrorCode::IoError);
  fs::remove(junk);
}
