#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "stc/data_pipeline.hpp"
#include "stc/io.hpp"

namespace stc::sft {
namespace {

constexpr const char* kMatches = "The stated result matches the expected value.";
constexpr const char* kDiffers =
    "The stated result does not match the expected value.";
constexpr const char* kNoResult = "No result is stated in this step.";

StepCritique judge(std::optional<std::string> stated,
                   const std::string& expected) {
  if (!stated) return {kNoResult, 0};
  try {
    const bool ok = answers_equal(canonicalize(*stated), canonicalize(expected));
    return {ok ? kMatches : kDiffers, ok ? 1 : 0};
  } catch (const Error&) {
    return {kDiffers, 0};
  }
}

// Boxed answer when present, else the last number stated.
std::optional<std::string> stated_result(const std::string& step) {
  Step s;
  s.reasoning = step;
  const AnswerExtraction boxed = extract_final_answer(std::span<const Step>(&s, 1));
  if (boxed.text) return boxed.text;
  return last_number(step);
}

CritiqueAnnotation parse_response(const std::string& body,
                                  const CritiqueRequest& request) {
  CritiqueAnnotation a;
  try {
    a = io::annotation_from_json(io::Json::parse(body));
  } catch (const io::Json::exception& e) {
    throw Error(std::string("provider returned invalid JSON: ") + e.what());
  }
  if (a.problem_id.empty()) a.problem_id = request.problem_id;
  return a;
}

}  // namespace

void AnnotationTable::add(CritiqueAnnotation annotation) {
  table_[annotation.problem_id].push_back(std::move(annotation));
}

CritiqueAnnotation AnnotationTable::annotate(const CritiqueRequest& request) {
  const auto it = table_.find(request.problem_id);
  std::size_t& next = served_[request.problem_id];
  if (it == table_.end() || next >= it->second.size())
    throw AnnotationMissing("no annotation recorded for problem '" +
                            request.problem_id + "'");
  return it->second[next++];
}

CritiqueAnnotation StubCritiqueProvider::annotate(
    const CritiqueRequest& request) {
  const auto it = gold_.find(request.problem_id);
  if (it == gold_.end())
    throw Error("no gold record for problem '" + request.problem_id + "'");
  const GoldRecord& g = it->second;
  const std::size_t T = request.steps.size();
  CritiqueAnnotation a;
  a.problem_id = request.problem_id;
  const bool per_step = T > 0 && g.gold_intermediates.size() == T;
  for (std::size_t i = 0; i < T; ++i) {
    if (per_step)
      a.steps.push_back(
          judge(stated_result(request.steps[i]), g.gold_intermediates[i]));
    else if (i + 1 == T)
      a.steps.push_back(judge(stated_result(request.steps[i]), g.gold_answer));
    else
      a.steps.push_back({"The step is consistent with the problem.", 1});
  }
  return a;
}

CritiqueAnnotation CommandCritiqueProvider::annotate(
    const CritiqueRequest& request) {
  std::string path =
      (std::filesystem::temp_directory_path() / "stc-request-XXXXXX").string();
  const int fd = mkstemp(path.data());
  if (fd < 0) throw Error("cannot create a temporary request file");
  close(fd);
  struct Cleanup {
    std::string path;
    ~Cleanup() { std::filesystem::remove(path); }
  } cleanup{path};
  {
    std::ofstream out(path, std::ios::binary);
    out << io::dump_line(io::request_to_json(request)) << '\n';
    if (!out) throw Error("cannot write the temporary request file");
  }

  const std::string cmd = "( " + command_ + "\n) < '" + path + "'";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw Error("cannot start provider command: " + command_);
  std::string body;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) body.append(buf, n);
  const int status = pclose(pipe);
  if (status != 0)
    throw Error("provider command exited with status " +
                std::to_string(status) + ": " + command_);
  return parse_response(body, request);
}

HttpCritiqueProvider::HttpCritiqueProvider(std::string url) {
  constexpr std::string_view scheme = "http://";
  if (url.rfind(scheme, 0) != 0)
    throw InvalidInput("only http:// provider URLs are supported: " + url);
  std::string rest = url.substr(scheme.size());
  const auto slash = rest.find('/');
  path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  std::string authority = rest.substr(0, slash);
  if (const auto colon = authority.rfind(':'); colon != std::string::npos) {
    const std::string port = authority.substr(colon + 1);
    char* end = nullptr;
    const long p = std::strtol(port.c_str(), &end, 10);
    if (port.empty() || *end != '\0' || p <= 0 || p > 65535)
      throw InvalidInput("invalid port in provider URL: " + url);
    port_ = static_cast<int>(p);
    authority.resize(colon);
  }
  if (authority.empty()) throw InvalidInput("missing host in provider URL: " + url);
  host_ = std::move(authority);
}

CritiqueAnnotation HttpCritiqueProvider::annotate(
    const CritiqueRequest& request) {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  const auto res = client.Post(path_, io::request_to_json(request).dump(),
                               "application/json");
  if (!res)
    throw Error("provider request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw Error("provider answered HTTP " + std::to_string(res->status));
  return parse_response(res->body, request);
}

std::unique_ptr<CritiqueProvider> make_provider(std::string_view spec,
                                                const GoldTable& gold) {
  auto strip = [&](std::string_view prefix) -> std::optional<std::string> {
    if (spec.substr(0, prefix.size()) != prefix) return std::nullopt;
    return std::string(spec.substr(prefix.size()));
  };
  if (spec == "stub" || spec == "stub:")
    return std::make_unique<StubCritiqueProvider>(gold);
  if (auto cmd = strip("exec:")) {
    if (cmd->empty()) throw InvalidInput("exec: provider needs a command");
    return std::make_unique<CommandCritiqueProvider>(*cmd);
  }
  if (spec.substr(0, 7) == "http://")
    return std::make_unique<HttpCritiqueProvider>(std::string(spec));
  if (auto path = strip("file:")) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open annotations file: " + *path);
    auto table = std::make_unique<AnnotationTable>();
    for (const io::Json& j : io::read_jsonl_strict(in))
      table->add(io::annotation_from_json(j));
    return table;
  }
  throw InvalidInput("unknown provider '" + std::string(spec) +
                     "' (expected stub:, exec:<command>, http://... or "
                     "file:<path>)");
}

}  // namespace stc::sft
