#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "tobo/ptogp.hpp"
#include "tobo/togp.hpp"

namespace tobo {

/// Schema tag and version of a saved surrogate; see docs/surrogate_schema.md.
inline constexpr const char* kSurrogateSchema = "tobo.surrogate";
inline constexpr int kSurrogateSchemaVersion = 1;

nlohmann::json to_json(const CoreTensorParam& core);
CoreTensorParam core_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TensorKernel& k);
TensorKernel kernel_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TogpHyper& h);
TogpHyper hyper_from_json(const nlohmann::json& j);

/// Fully observed surrogate: hyperparameters plus training data.
nlohmann::json surrogate_to_json(const TogpHyper& h, const Dataset& data);
/// Partially observed surrogate; the data block carries one selection bitstring per row.
nlohmann::json surrogate_to_json(const TogpHyper& h, const PartialDataset& data);

struct LoadedSurrogate {
    TogpHyper hyper;
    Eigen::MatrixXd X;
    EntryLists entries;
    Eigen::VectorXd Y;
    bool partial = false;
    std::size_t k = 0;
};

/// Throws ConfigError on a schema or version mismatch.
LoadedSurrogate surrogate_from_json(const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

}  // namespace tobo
