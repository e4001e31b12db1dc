#include "ipidlab/trace_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ipidlab {
namespace {
using json = nlohmann::ordered_json;
}

std::string trace_to_jsonl(const PacketTrace& trace) {
  std::string out;
  for (const auto& rec : trace) {
    json line;
    line["dst"] = to_string(rec.dst);
    line["ipid"] = rec.ipid;
    line["t_send"] = rec.t_send;
    line["t_arrive"] = rec.t_arrive;
    line["burst"] = rec.burst;
    line["dropped"] = rec.dropped;
    out += line.dump();
    out += '\n';
  }
  return out;
}

PacketTrace trace_from_jsonl(const std::string& text) {
  PacketTrace trace;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    trace.push_back({parse_ipv4(rec.at("dst").get<std::string>()),
                     rec.at("ipid").get<std::uint16_t>(),
                     rec.at("t_send").get<double>(),
                     rec.at("t_arrive").get<double>(), rec.at("burst").get<int>(),
                     rec.at("dropped").get<bool>()});
  }
  return trace;
}

void save_trace(const std::string& path, const PacketTrace& trace) {
  write_text_file(path, trace_to_jsonl(trace));
}

PacketTrace load_trace(const std::string& path) {
  return trace_from_jsonl(read_text_file(path));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace ipidlab
