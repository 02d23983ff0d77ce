// Stand-in denoiser process speaking the bridge protocol on stdin/stdout.
//
// Latent geometry is [4, h/8, w/8]. encode averages 8x8 blocks (channel 3 is
// the grey level), decode replicates them back, predict_noise returns
// 0.1 * z + 0.01 * t so callers can check what crossed the wire.
//
// Flags: --protocol V   answer hello with version V
//        --hangup       close the channel instead of answering hello
//        --reject       answer hello with a capability error

#include <unistd.h>

#include <cstring>
#include <map>
#include <string>

#include "tryw/bridge.hpp"

using namespace tryw::bridge;

namespace {

struct State {
  int c = 4, h = 0, w = 0;
  int next_ref = 0;
  std::map<std::string, std::string> prompts;
};

Message reply(const std::string& op) {
  Message m;
  m.header = {{"op", op}};
  return m;
}

Message handle(State& s, const Message& req) {
  const std::string op = req.header["op"];
  const auto& h = req.header;
  if (op == "hello") {
    const auto& dims = h.at("image_dims");
    s.h = dims.at(0).get<int>() / 8;
    s.w = dims.at(1).get<int>() / 8;
    Message m = reply("hello-ack");
    m.header["protocol"] = kProtocolVersion;
    m.header["latent_geometry"] = {s.c, s.h, s.w};
    m.header["backbone_id"] = "fake-" + h.value("backbone", std::string()) + "-" +
                              h.value("fusion", std::string());
    return m;
  }
  if (op == "condition") {
    const std::string ref = "cond-" + std::to_string(s.next_ref++);
    s.prompts[ref] = h.value("prompt", std::string());
    Message m = reply("condition-ack");
    m.header["cond-ref"] = ref;
    return m;
  }
  if (op == "predict_noise") {
    const std::string ref = h.value("cond-ref", std::string());
    if (!s.prompts.count(ref)) return error_message("bad_payload", "unknown cond-ref " + ref);
    const double t = h.at("t").get<double>();
    Message m = reply("predict_noise");
    m.header["dims"] = h.at("dims");
    m.payload.reserve(req.payload.size());
    for (float v : req.payload) m.payload.push_back(static_cast<float>(0.1 * v + 0.01 * t));
    return m;
  }
  if (op == "encode") {
    const auto& d = h.at("dims");
    const int ih = d.at(1).get<int>(), iw = d.at(2).get<int>();
    const int lh = ih / 8, lw = iw / 8;
    Message m = reply("encode");
    m.header["dims"] = {s.c, lh, lw};
    m.payload.assign(static_cast<std::size_t>(s.c) * lh * lw, 0.0f);
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < lh * 8; ++y)
        for (int x = 0; x < lw * 8; ++x) {
          const float v = req.payload[(static_cast<std::size_t>(ch) * ih + y) * iw + x] / 64.0f;
          m.payload[(static_cast<std::size_t>(ch) * lh + y / 8) * lw + x / 8] += v;
          m.payload[(static_cast<std::size_t>(3) * lh + y / 8) * lw + x / 8] += v / 3.0f;
        }
    return m;
  }
  if (op == "decode") {
    const auto& d = h.at("dims");
    const int lh = d.at(1).get<int>(), lw = d.at(2).get<int>();
    Message m = reply("decode");
    m.header["dims"] = {3, lh * 8, lw * 8};
    m.payload.resize(static_cast<std::size_t>(3) * lh * 8 * lw * 8);
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < lh * 8; ++y)
        for (int x = 0; x < lw * 8; ++x)
          m.payload[(static_cast<std::size_t>(ch) * lh * 8 + y) * lw * 8 + x] =
              req.payload[(static_cast<std::size_t>(ch) * lh + y / 8) * lw + x / 8];
    return m;
  }
  if (op == "shutdown") return reply("shutdown-ack");
  return error_message("bad_op", "unsupported op '" + op + "'");
}

}  // namespace

int main(int argc, char** argv) {
  std::string protocol = kProtocolVersion;
  bool hangup = false, reject = false;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--protocol") && i + 1 < argc) protocol = argv[++i];
    if (!std::strcmp(argv[i], "--hangup")) hangup = true;
    if (!std::strcmp(argv[i], "--reject")) reject = true;
  }

  FdStream io(STDIN_FILENO, STDOUT_FILENO);
  State state;
  for (;;) {
    ReadResult r = read_message(io);
    if (r.status == ReadStatus::Eof) return 1;
    if (r.status == ReadStatus::BadHeader) {
      write_message(io, error_message("bad_op", r.error));
      continue;
    }
    if (r.status == ReadStatus::BadPayload) {
      write_message(io, error_message("bad_payload", r.error));
      continue;
    }
    const std::string op = r.message.header["op"];
    if (op == "hello" && hangup) return 4;
    if (op == "hello" && reject) {
      write_message(io, error_message("capability", "backbone not available"));
      continue;
    }
    Message resp;
    try {
      resp = handle(state, r.message);
    } catch (const std::exception& e) {
      resp = error_message("bad_payload", e.what());
    }
    if (op == "hello" && resp.header["op"] == "hello-ack") resp.header["protocol"] = protocol;
    write_message(io, resp);
    if (op == "shutdown") return 0;
  }
}
