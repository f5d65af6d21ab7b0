#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "confclust/conformal.hpp"
#include "confclust/evaluate.hpp"
#include "confclust/simulate.hpp"

namespace confclust::io {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kFormatVersion = 1;

/// Malformed or schema-violating configuration; the message names the field.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Read or write failure on a file.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

//------------------------------------------------------------------------------
// Text formats
//------------------------------------------------------------------------------

/// Shortest round-trip decimal representation, independent of the C locale.
std::string format_double(double v);
double parse_double(std::string_view s);

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

/// CSV with a header row; lines starting with '#' are comments.
Dataset parse_dataset_csv(const std::string& text);
std::string dataset_csv(const Dataset& X, const std::string& comment = {});
/// Single-column CSV of 1-based labels (header optional). K = 0 infers K from the maximum label.
Labeling parse_labels_csv(const std::string& text, int K = 0);
std::string labels_csv(const Labeling& Y, const std::string& comment = {});
/// Columns row, set_size, members (1-based, semicolon-joined).
std::string sets_csv(const std::vector<ConfidenceSet>& sets, const std::string& comment = {});
std::string members_field(const ConfidenceSet& s);

std::string read_text(const std::string& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_text_atomic(const std::string& path, const std::string& content);

Dataset read_dataset_csv(const std::string& path);
Labeling read_labels_csv(const std::string& path, int K = 0);

//------------------------------------------------------------------------------
// JSON documents
//------------------------------------------------------------------------------

json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const json& j, const std::string& field);

json to_json(const MixtureModel& m);
MixtureModel mixture_from_json(const json& j);
json to_json(const FcmModel& m);
FcmModel fcm_from_json(const json& j);
json to_json(const ClassifierModel& m);
ClassifierModel classifier_from_json(const json& j);

json to_json(const ClustererSpec& s);
/// `p` resolves family "auto" (gaussian-diag when p > 50). Kind "oracle" needs `truth`.
ClustererSpec clusterer_spec_from_json(const json& j, int p, const GeneratorConfig* truth = nullptr);
json to_json(const ClassifierSpec& s);
ClassifierSpec classifier_spec_from_json(const json& j);

json to_json(const GeneratorConfig& g);
GeneratorConfig generator_from_json(const json& j);

json to_json(const PipelineConfig& c);
json to_json(const ConformalPipeline& p);
ConformalPipeline pipeline_from_json(const json& j);

json to_json(const DiagnosticsReport& r);
json to_json(const CoverageReport& r);

ExperimentConfig experiment_config_from_json(const json& j);
std::string experiment_tidy_csv(const ExperimentResult& r, const std::string& comment = {});
std::string experiment_aggregate_csv(const ExperimentResult& r, const std::string& comment = {});

/// Throws ConfigError when `j` is not an object or carries keys outside `allowed`.
void require_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where);

}  // namespace confclust::io
