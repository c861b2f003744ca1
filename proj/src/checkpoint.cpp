#include "hsn/checkpoint.hpp"

#include <algorithm>

#include "hsn/binary_io.hpp"
#include "hsn/error.hpp"

namespace hsn {

std::vector<uint8_t> serialize_checkpoint(const Network& net) {
  io::ByteWriter out;
  out.put_bytes(std::span(reinterpret_cast<const uint8_t*>("HSNW"), 4));
  out.put(kCheckpointVersion);
  out.put_string(net.config().to_text());
  const auto& ps = net.parameters();
  out.put(static_cast<uint32_t>(ps.size()));
  for (size_t k = 0; k < ps.size(); ++k) {
    const auto& p = ps[k];
    out.put_string(p.name);
    out.put(static_cast<uint32_t>(p.value.rows()));
    out.put(static_cast<uint32_t>(p.value.cols()));
    for (double v : p.value.reshaped<Eigen::RowMajor>()) out.put(v);
  }
  out.put_crc(0);
  return out.take();
}

Network parse_checkpoint(std::span<const uint8_t> bytes) {
  io::ByteReader in(bytes);
  const auto magic = in.get_bytes(4);
  if (!std::equal(magic.begin(), magic.end(), "HSNW")) throw FormatError("not an HSNW checkpoint (bad magic)");
  const auto version = in.get<uint16_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  const auto text = in.get_string();
  ModelConfig config;
  try {
    config = ModelConfig::parse(text);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint config is inconsistent: ") + e.what());
  }
  Network net(config);
  auto& ps = net.parameters();
  const auto count = in.get<uint32_t>();
  if (count != ps.size())
    throw FormatError("checkpoint has " + std::to_string(count) + " parameter blocks, config implies " +
                      std::to_string(ps.size()));
  for (size_t k = 0; k < count; ++k) {
    auto& p = ps[k];
    const auto name = in.get_string();
    const auto rows = in.get<uint32_t>();
    const auto cols = in.get<uint32_t>();
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols())
      throw FormatError("checkpoint block '" + name + "' does not match the config's '" + p.name + "'");
    for (double& v : p.value.reshaped<Eigen::RowMajor>()) v = in.get<double>();
  }
  in.check_crc(0, "checkpoint");
  if (!in.at_end()) throw FormatError("trailing bytes after checkpoint");
  return net;
}

void save_checkpoint(const Network& net, const std::string& path) { io::write_file(path, serialize_checkpoint(net)); }

Network load_checkpoint(const std::string& path) { return parse_checkpoint(io::read_file(path)); }

}  // namespace hsn
