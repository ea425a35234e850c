#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mentorkd {

// Fixed artifact names inside a run directory.
namespace files {
inline constexpr const char* kRecordsTrain = "records_train.jsonl";
inline constexpr const char* kRecordsTest = "records_test.jsonl";
inline constexpr const char* kTeacherAnnotations = "annotations_teacher.jsonl";
inline constexpr const char* kTeacherSet = "teacher_set.jsonl";
inline constexpr const char* kMentorCheckpoint = "mentor.ckpt";
inline constexpr const char* kMentorMetrics = "mentor_metrics.csv";
inline constexpr const char* kMentorSet = "mentor_set.jsonl";
inline constexpr const char* kTrainSet = "train_set.jsonl";
inline constexpr const char* kStudentCheckpoint = "student.ckpt";
inline constexpr const char* kStudentMetrics = "student_metrics.csv";
inline constexpr const char* kEvalReport = "eval_report.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kResolvedConfig = "config.resolved.toml";
}  // namespace files

// Exit status: 0 success, 1 usage error, 2 runtime error. args excludes the program name.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace mentorkd
