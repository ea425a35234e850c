#include "mentorkd/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "mentorkd/error.hpp"

namespace mentorkd {

namespace {

constexpr char kMagic[8] = {'M', 'K', 'D', 'C', 'K', 'P', 'T', '\0'};

nlohmann::json number_or_null(double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); }

double number_from(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

template <class V>
void write_floats(std::ofstream& out, const V& values) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
}

void read_floats(std::ifstream& in, std::vector<float>& values, const std::filesystem::path& path) {
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!in) {
        throw DataError(path.string() + ": checkpoint is truncated");
    }
}

}  // namespace

void save_checkpoint(const TinyTransformer& model, const TrainState* state, const std::filesystem::path& path) {
    nlohmann::ordered_json header;
    header["format_version"] = kCheckpointVersion;
    const auto& c = model.config();
    header["config"] = {{"layers", c.layers},
                        {"model_dim", c.model_dim},
                        {"heads", c.heads},
                        {"feedforward_dim", c.feedforward_dim},
                        {"max_sequence", c.max_sequence},
                        {"dropout_rate", c.dropout_rate}};
    header["role"] = to_string(model.role());
    header["alphabet"] = model.tokenizer().alphabet();
    auto& shapes = header["parameters"] = nlohmann::ordered_json::array();
    for (const auto& p : model.parameters()) {
        shapes.push_back({{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}});
    }
    if (state != nullptr) {
        auto& s = header["train_state"];
        s["step"] = state->step;
        s["total_steps"] = state->total_steps;
        s["epoch"] = state->epoch;
        s["next_batch"] = state->next_batch;
        s["sum_rd"] = number_or_null(state->sum_rd);
        s["sum_sld"] = number_or_null(state->sum_sld);
        s["sum_total"] = number_or_null(state->sum_total);
        s["batches_in_epoch"] = state->batches_in_epoch;
        s["dropout_rng"] = state->dropout_rng;
        auto& hist = s["history"] = nlohmann::ordered_json::array();
        for (const auto& m : state->history) {
            hist.push_back({m.epoch, number_or_null(m.loss_rd), number_or_null(m.loss_sld),
                            number_or_null(m.loss_total), number_or_null(m.train_acc), number_or_null(m.eval_acc)});
        }
    }
    const std::string text = header.dump();

    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out.write(kMagic, sizeof kMagic);
    const std::uint32_t version = kCheckpointVersion;
    const std::uint64_t length = text.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&length), sizeof length);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.parameters()) {
        write_floats(out, p.value);
    }
    if (state != nullptr) {
        for (const auto& m : state->adam_m) {
            write_floats(out, m);
        }
        for (const auto& v : state->adam_v) {
            write_floats(out, v);
        }
    }
    if (!out) {
        throw DataError("failed writing " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint " + path.string());
    }
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t length = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&length), sizeof length);
    if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw DataError(path.string() + " is not a checkpoint file");
    }
    if (version != kCheckpointVersion) {
        throw DataError(path.string() + ": unsupported checkpoint format version " + std::to_string(version));
    }
    if (length > (std::uint64_t{1} << 32)) {
        throw DataError(path.string() + ": corrupt header length");
    }
    std::string text(length, '\0');
    in.read(text.data(), static_cast<std::streamsize>(length));
    if (!in) {
        throw DataError(path.string() + ": checkpoint is truncated");
    }
    try {
        const auto header = nlohmann::json::parse(text);
        if (header.at("format_version").get<std::uint32_t>() != kCheckpointVersion) {
            throw DataError(path.string() + ": header format version mismatch");
        }
        const auto& jc = header.at("config");
        ModelConfig config{jc.at("layers").get<int>(),          jc.at("model_dim").get<int>(),
                           jc.at("heads").get<int>(),           jc.at("feedforward_dim").get<int>(),
                           jc.at("max_sequence").get<int>(),    jc.at("dropout_rate").get<double>()};
        config.validate();
        Tokenizer tokenizer(header.at("alphabet").get<std::string>());
        const ModelRole role = parse_model_role(header.at("role").get<std::string>());

        std::vector<Parameter<float>> params;
        for (const auto& s : header.at("parameters")) {
            Parameter<float> p;
            p.name = s.at("name").get<std::string>();
            p.rows = s.at("rows").get<int>();
            p.cols = s.at("cols").get<int>();
            if (p.rows < 0 || p.cols < 0 || static_cast<std::uint64_t>(p.rows) * p.cols > (1ULL << 31)) {
                throw DataError(path.string() + ": bad parameter shape for " + p.name);
            }
            p.value.resize(static_cast<std::size_t>(p.rows) * p.cols);
            read_floats(in, p.value, path);
            params.push_back(std::move(p));
        }
        Checkpoint ck{TinyTransformer::from_parameters(config, tokenizer, role, std::move(params)), std::nullopt};

        if (header.contains("train_state")) {
            const auto& s = header.at("train_state");
            TrainState st;
            st.step = s.at("step").get<long>();
            st.total_steps = s.at("total_steps").get<long>();
            st.epoch = s.at("epoch").get<int>();
            st.next_batch = s.at("next_batch").get<int>();
            st.sum_rd = number_from(s.at("sum_rd"));
            st.sum_sld = number_from(s.at("sum_sld"));
            st.sum_total = number_from(s.at("sum_total"));
            st.batches_in_epoch = s.at("batches_in_epoch").get<int>();
            st.dropout_rng = s.at("dropout_rng").get<std::string>();
            for (const auto& h : s.at("history")) {
                st.history.push_back({h.at(0).get<int>(), number_from(h.at(1)), number_from(h.at(2)),
                                      number_from(h.at(3)), number_from(h.at(4)), number_from(h.at(5))});
            }
            for (auto* moments : {&st.adam_m, &st.adam_v}) {
                for (const auto& p : ck.model.parameters()) {
                    moments->emplace_back(p.value.size());
                    read_floats(in, moments->back(), path);
                }
            }
            ck.state = std::move(st);
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed checkpoint header: " + e.what());
    }
}

}  // namespace mentorkd
