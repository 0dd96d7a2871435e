#include "rebama/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "rebama/error.hpp"

namespace rebama {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'R', 'E', 'B', 'A', 'M', 'A', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ValidationError("checkpoint is truncated");
  return value;
}

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd get_vector(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 28)) throw ValidationError("checkpoint vector length is implausible");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ValidationError("checkpoint is truncated");
  return v;
}

void write_network(std::ostream& out, const std::string& name, const Mlp& net) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::int32_t>(out, net.input_size());
  put<std::int32_t>(out, net.hidden_size());
  put<std::int32_t>(out, net.output_size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.head().kind));
  put<std::int32_t>(out, net.head().blocks);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.head().lower.size()));
  put_vector(out, net.head().lower);
  put_vector(out, net.head().upper);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(net.parameter_count()));
  put_vector(out, net.parameters());
}

Mlp read_network(std::istream& in, const std::string& expected_name) {
  const auto name_length = get<std::uint32_t>(in);
  if (name_length > 256) throw ValidationError("checkpoint network name is implausible");
  std::string name(name_length, '\0');
  in.read(name.data(), name_length);
  if (!in) throw ValidationError("checkpoint is truncated");
  if (name != expected_name) {
    throw ValidationError("checkpoint network '" + name + "' found where '" + expected_name +
                          "' was expected");
  }
  const auto input = get<std::int32_t>(in);
  const auto hidden = get<std::int32_t>(in);
  const auto output = get<std::int32_t>(in);
  const auto kind = get<std::uint32_t>(in);
  const auto blocks = get<std::int32_t>(in);
  const auto bounds = get<std::uint32_t>(in);
  if (kind > 2) throw ValidationError("checkpoint has an unknown head kind");
  Head head;
  head.kind = static_cast<HeadKind>(kind);
  head.blocks = blocks;
  head.lower = get_vector(in, bounds);
  head.upper = get_vector(in, bounds);
  Mlp net(input, output, std::move(head), hidden);
  const auto count = get<std::uint64_t>(in);
  net.set_parameters(get_vector(in, count));
  return net;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::int32_t>(out, checkpoint.grid_width);
  put<std::int32_t>(out, checkpoint.grid_height);
  put<std::int32_t>(out, checkpoint.horizon);
  put<double>(out, checkpoint.observation_scale);
  put<std::int32_t>(out, checkpoint.episodes);
  put<std::uint32_t>(out, 3);
  write_network(out, "region_policy", checkpoint.region_policy);
  write_network(out, "adversary_policy", checkpoint.adversary_policy);
  write_network(out, "critic", checkpoint.critic);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ValidationError("not a rebama checkpoint (bad magic)");
  if (get<std::uint32_t>(in) != kVersion) {
    throw ValidationError("unsupported checkpoint format version");
  }
  Checkpoint c;
  c.grid_width = get<std::int32_t>(in);
  c.grid_height = get<std::int32_t>(in);
  c.horizon = get<std::int32_t>(in);
  c.observation_scale = get<double>(in);
  c.episodes = get<std::int32_t>(in);
  if (get<std::uint32_t>(in) != 3) throw ValidationError("checkpoint must hold three networks");
  c.region_policy = read_network(in, "region_policy");
  c.adversary_policy = read_network(in, "adversary_policy");
  c.critic = read_network(in, "critic");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  write_checkpoint(out, checkpoint);
  if (!out) throw IoError("failed while writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace rebama
