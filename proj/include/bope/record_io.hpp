#ifndef BOPE_RECORD_IO_HPP
#define BOPE_RECORD_IO_HPP

#include <filesystem>
#include <string>
#include <string_view>

#include "bope/loop.hpp"

namespace bope {

inline constexpr const char* kRunSchema = "bope.run/1";

/// JSON lines: one "header" line, one "iteration" line per iteration and a
/// closing "summary" line. Doubles are written in shortest round-trip form,
/// so load(save(r)) reproduces every value bit for bit.
std::string record_to_jsonl(const RunRecord& record, bool include_timings = true);
/// Throws InputError on a malformed document or an unknown schema.
RunRecord record_from_jsonl(std::string_view text);

void save_record(const std::filesystem::path& path, const RunRecord& record);
RunRecord load_record(const std::filesystem::path& path);

}  // namespace bope

#endif  // BOPE_RECORD_IO_HPP
