#pragma once

#include <string>

#include "ipidlab/netsim.hpp"

namespace ipidlab {

// Line-delimited JSON, one record per line with a stable field order, so
// traces diff cleanly and round-trip exactly.
std::string trace_to_jsonl(const PacketTrace& trace);
PacketTrace trace_from_jsonl(const std::string& text);

void save_trace(const std::string& path, const PacketTrace& trace);
PacketTrace load_trace(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace ipidlab
