// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line front end. run_command() is the whole program minus main(),
// so it can be driven in-process with string streams.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bitnet/bench.hpp"
#include "bitnet/chat_template.hpp"
#include "bitnet/config.hpp"
#include "bitnet/error.hpp"
#include "bitnet/format.hpp"
#include "bitnet/model.hpp"
#include "bitnet/tokenizer.hpp"

namespace bitnet::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIoError = 3,
  kFormatError = 4,
  kModelError = 5,
  kInvalidInput = 6,
};

inline int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kIo: return kIoError;
    case ErrorKind::kBadMagic:
    case ErrorKind::kUnsupportedVersion:
    case ErrorKind::kTruncated:
    case ErrorKind::kOverlappingRecords:
    case ErrorKind::kReservedCode:
    case ErrorKind::kDuplicateName:
    case ErrorKind::kMalformedHeader:
    case ErrorKind::kChecksumMismatch:
    case ErrorKind::kCorruptData: return kFormatError;
    case ErrorKind::kShape:
    case ErrorKind::kCapacity:
    case ErrorKind::kInvalidToken: return kModelError;
    case ErrorKind::kInvalidInput:
    case ErrorKind::kRoleOrder:
    case ErrorKind::kReservedMarker: return kInvalidInput;
  }
  return kInternal;
}

inline constexpr const char* kExitCodeHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (unknown flag, missing argument)\n"
    "  3  I/O error (missing or unreadable file)\n"
    "  4  model file format error (bad magic, version, truncation, corrupt payload)\n"
    "  5  model error (shape mismatch, context capacity, invalid token)\n"
    "  6  invalid input (bad config, chat role order, reserved marker)\n";

namespace detail {

inline KernelPath parse_kernel(const std::string& s) {
  if (s == "packed") return KernelPath::kPacked;
  if (s == "lut") return KernelPath::kLut;
  if (s == "reference") return KernelPath::kReference;
  fail(ErrorKind::kInvalidInput, "unknown kernel '" + s + "'");
}

inline ModelConfig read_config_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (j.contains("config")) j = j["config"];  // accept a converter manifest too
    auto cfg = j.get<ModelConfig>();
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidInput, path.string() + ": " + e.what());
  }
}

inline std::vector<TokenId> prompt_ids(const Tokenizer& tok, const std::string& text) {
  std::vector<TokenId> ids{tok.begin_of_text_id()};
  const auto body = tok.encode(text, false);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

inline const char* dtype_name(DType d) {
  return d == DType::kPackedTernary ? "packed_ternary" : "real32";
}

inline nlohmann::json inspect_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const ModelFile f = parse_model(bytes);
  nlohmann::json tensors = nlohmann::json::array();
  uint64_t packed_total = 0, real_total = 0;
  for (const auto& r : f.records) {
    const uint64_t fp32 = 4ull * r.rows * r.cols;
    nlohmann::json t = {{"name", r.name},
                        {"dtype", dtype_name(r.dtype)},
                        {"rows", r.rows},
                        {"cols", r.cols},
                        {"offset", r.offset},
                        {"stored_bytes", r.length},
                        {"fp32_bytes", fp32}};
    if (r.dtype == DType::kPackedTernary) {
      t["weight_scale"] = r.weight_scale;
      t["compression_vs_fp32"] = double(fp32) / double(r.length);
      packed_total += r.length;
    } else {
      real_total += r.length;
    }
    tensors.push_back(std::move(t));
  }
  return {{"magic", std::string(kMagic, 4)},
          {"version", f.version},
          {"file_bytes", bytes.size()},
          {"config", f.config},
          {"tensor_count", f.records.size()},
          {"packed_bytes", packed_total},
          {"real_bytes", real_total},
          {"tensors", tensors}};
}

}  // namespace detail

inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                       std::istream& in) {
  CLI::App app{"Ternary-weight (1.58-bit) transformer inference engine", "bitnet"};
  app.footer(kExitCodeHelp);
  app.require_subcommand(1);

  // convert
  std::string manifest, output, report_path;
  auto* convert = app.add_subcommand("convert", "Quantize a float32 checkpoint into a model file");
  convert->add_option("--manifest", manifest, "Checkpoint manifest JSON")->required();
  convert->add_option("--output,-o", output, "Model file to write")->required();
  convert->add_option("--report", report_path, "Also write the conversion report here");

  // shared decoding flags
  std::string model_path, prompt, kernel_name = "packed", system_message;
  std::size_t max_new_tokens = 32;
  float temperature = 0.0f;
  std::optional<std::size_t> top_k;
  uint64_t seed = 0;
  unsigned threads = 8;
  bool print_ids = false;
  auto add_decoding = [&](CLI::App* sub) {
    sub->add_option("--model,-m", model_path, "Model file")->required();
    sub->add_option("--max-new-tokens,-n", max_new_tokens, "Tokens to generate")->capture_default_str();
    sub->add_option("--temperature", temperature, "0 = greedy")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--top-k", top_k, "Keep only the k most likely tokens")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Sampling seed")->capture_default_str();
    sub->add_option("--threads,-t", threads, "Kernel worker count")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--kernel", kernel_name, "packed | lut | reference")->capture_default_str();
  };

  auto* generate_cmd = app.add_subcommand("generate", "Generate text from a prompt");
  add_decoding(generate_cmd);
  generate_cmd->add_option("--prompt,-p", prompt, "Prompt text");
  generate_cmd->add_flag("--ids", print_ids, "Print generated token ids as JSON instead of text");

  auto* chat_cmd = app.add_subcommand("chat", "Interactive chat over stdin, one user turn per line");
  add_decoding(chat_cmd);
  chat_cmd->add_option("--system", system_message, "System message");

  // bench
  std::size_t bench_tokens = 128;
  std::string bench_format = "json";
  auto* bench_cmd = app.add_subcommand("bench", "Measure decode latency per token");
  bench_cmd->add_option("--model,-m", model_path, "Model file")->required();
  bench_cmd->add_option("--tokens", bench_tokens, "Timed decode steps")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--threads,-t", threads, "Kernel worker count")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--prompt,-p", prompt, "Prompt text (begin-of-text is always prepended)");
  bench_cmd->add_option("--kernel", kernel_name, "packed | lut | reference")->capture_default_str();
  bench_cmd->add_option("--format", bench_format, "json | text")->capture_default_str()->check(CLI::IsMember({"json", "text"}));

  // energy
  std::string config_path, energy_mode = "both";
  std::size_t energy_tokens = kDefaultEnergyTokens;
  EnergyTable table;
  auto* energy_cmd = app.add_subcommand("energy", "Estimate matmul arithmetic energy");
  auto* cfg_opt = energy_cmd->add_option("--config", config_path, "ModelConfig JSON (or a converter manifest)");
  auto* model_opt = energy_cmd->add_option("--model,-m", model_path, "Take the config from a model file");
  cfg_opt->excludes(model_opt);
  energy_cmd->add_option("--tokens", energy_tokens, "Sequence length")->capture_default_str();
  energy_cmd->add_option("--mode", energy_mode, "fp16 | w158a8 | both")->capture_default_str()->check(CLI::IsMember({"fp16", "w158a8", "both"}));
  energy_cmd->add_option("--fp16-add-pj", table.fp16_add_pj)->capture_default_str();
  energy_cmd->add_option("--fp16-mul-pj", table.fp16_mul_pj)->capture_default_str();
  energy_cmd->add_option("--int8-add-pj", table.int8_add_pj)->capture_default_str();
  energy_cmd->add_option("--int8-mul-pj", table.int8_mul_pj)->capture_default_str();

  auto* inspect_cmd = app.add_subcommand("inspect", "Print header, config and tensor table as JSON");
  inspect_cmd->add_option("--model,-m", model_path, "Model file")->required();

  std::vector<const char*> argv;
  argv.push_back("bitnet");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    ByteTokenizer tokenizer;
    if (convert->parsed()) {
      const auto report = convert_checkpoint(manifest, output);
      const nlohmann::json j = report;
      if (!report_path.empty()) {
        const std::string text = j.dump(2) + "\n";
        write_file(report_path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
      }
      out << j.dump(2) << "\n";
    } else if (generate_cmd->parsed()) {
      const Model model = load_model(model_path);
      GenerationParams params{max_new_tokens, temperature, top_k, seed, {}};
      ForwardOptions fwd;
      fwd.path = detail::parse_kernel(kernel_name);
      fwd.kernel.workers = threads;
      const auto result = generate(detail::prompt_ids(tokenizer, prompt), model, params, fwd);
      if (print_ids) {
        out << nlohmann::json(result.ids).dump() << "\n";
      } else {
        out << tokenizer.decode(result.ids) << "\n";
      }
    } else if (chat_cmd->parsed()) {
      const Model model = load_model(model_path);
      GenerationParams params{max_new_tokens, temperature, top_k, seed, {tokenizer.eot_id()}};
      ForwardOptions fwd;
      fwd.path = detail::parse_kernel(kernel_name);
      fwd.kernel.workers = threads;
      std::vector<ChatMessage> history;
      if (!system_message.empty()) history.push_back({Role::kSystem, system_message});
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        history.push_back({Role::kUser, line});
        const auto ids = tokenizer.encode(apply_chat_template(history), true);
        auto result = generate(ids, model, params, fwd);
        // keep the reply renderable on the next turn
        std::erase_if(result.ids, [&](TokenId id) { return id >= 256; });
        std::string reply = tokenizer.decode(result.ids);
        for (std::string_view marker : {kBeginOfText, kEndOfTurn}) {
          for (auto pos = reply.find(marker); pos != std::string::npos; pos = reply.find(marker)) {
            reply.erase(pos, marker.size());
          }
        }
        out << "Assistant: " << reply << "\n" << std::flush;
        history.push_back({Role::kAssistant, reply});
      }
    } else if (bench_cmd->parsed()) {
      const Model model = load_model(model_path);
      BenchOptions opt{bench_tokens, threads, detail::parse_kernel(kernel_name)};
      const auto report = measure_tpot(model, detail::prompt_ids(tokenizer, prompt), opt);
      if (bench_format == "text") {
        out << format_report_table(report);
      } else {
        out << nlohmann::json(report).dump(2) << "\n";
      }
    } else if (energy_cmd->parsed()) {
      ModelConfig cfg;
      if (!config_path.empty()) {
        cfg = detail::read_config_file(config_path);
      } else if (!model_path.empty()) {
        cfg = read_model(model_path).config;
      } else {
        fail(ErrorKind::kInvalidInput, "energy needs --config or --model");
      }
      nlohmann::json j = {{"tokens", energy_tokens},
                          {"macs", count_weight_macs(cfg, energy_tokens)},
                          {"table_pj",
                           {{"fp16_add", table.fp16_add_pj},
                            {"fp16_mul", table.fp16_mul_pj},
                            {"int8_add", table.int8_add_pj},
                            {"int8_mul", table.int8_mul_pj}}}};
      if (energy_mode != "w158a8") {
        j["fp16_joules"] = estimate_energy(cfg, energy_tokens, table, EnergyMode::kFp16);
      }
      if (energy_mode != "fp16") {
        j["w158a8_joules"] = estimate_energy(cfg, energy_tokens, table, EnergyMode::kW158A8);
      }
      if (energy_mode == "both") {
        j["fp16_to_w158a8_ratio"] = energy_per_mac_pj(table, EnergyMode::kFp16) /
                                    energy_per_mac_pj(table, EnergyMode::kW158A8);
      }
      out << j.dump(2) << "\n";
    } else if (inspect_cmd->parsed()) {
      out << detail::inspect_json(model_path).dump(2) << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}

}  // namespace bitnet::cli
