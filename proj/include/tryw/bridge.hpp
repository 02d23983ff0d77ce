#pragma once

#include <sys/types.h>

#include <array>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "tryw/ingest.hpp"
#include "tryw/ppg.hpp"

namespace tryw::bridge {

// Wire protocol between the engine and an external denoiser process.
//
// Every message is one JSON header line followed by `byte_length` bytes of
// little-endian float32 payload (the tensor-file body layout). Requests:
//   hello          {protocol, backbone, fusion, image_dims:[h,w]}
//   condition      {dims:[8,h,w], prompt}  payload: infused RGB, agnostic
//                  mask, garment RGB, garment mask (channel-major)
//   predict_noise  {t, dims:[c,h,w], cond-ref}  payload: latent
//   encode         {dims:[3,h,w]}  payload: image in [0,1]
//   decode         {dims:[c,h,w]}  payload: latent
//   shutdown       {}
// Each request gets exactly one response, in order. Failures are answered
// with {op:"error", code, message}; codes: bad_op, bad_payload, capability.
inline constexpr const char* kProtocolVersion = "1";
inline constexpr const char* kBridgeCommandEnv = "TRYW_BRIDGE_CMD";

struct Message {
  nlohmann::json header = nlohmann::json::object();
  std::vector<float> payload;
};

// Buffered reader/writer over a pair of file descriptors.
class FdStream {
 public:
  FdStream(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

  // Next '\n'-terminated line without the terminator; nullopt on EOF.
  std::optional<std::string> read_line();
  bool read_exact(std::uint8_t* out, std::size_t n);
  void write_all(const void* data, std::size_t n);

 private:
  bool fill();

  int read_fd_;
  int write_fd_;
  std::vector<char> buf_;
  std::size_t head_ = 0;
};

// Number of floats implied by a "dims" array, or nullopt if it is malformed.
std::optional<std::size_t> element_count(const nlohmann::json& dims);

enum class ReadStatus { Ok, Eof, BadHeader, BadPayload };

struct ReadResult {
  ReadStatus status = ReadStatus::Eof;
  Message message;
  std::string error;
};

// Reads one message. BadHeader / BadPayload leave the stream positioned at
// the next header line so a server can answer and resynchronize.
ReadResult read_message(FdStream& stream);
void write_message(FdStream& stream, const Message& msg);

Message error_message(const std::string& code, const std::string& text);

// Channel-major packing helpers.
std::vector<float> image_to_chw(const ImagePlane& img);
ImagePlane image_from_chw(const std::vector<float>& data, int channels, int height, int width);

// Child process attached through a socket pair on its stdin/stdout.
class Process {
 public:
  explicit Process(const std::string& shell_command);
  ~Process();
  Process(const Process&) = delete;
  Process& operator=(const Process&) = delete;

  FdStream& stream() { return stream_; }
  // Closes the channel and reaps the child; returns its exit status.
  int wait(double timeout_seconds = 5.0);

 private:
  pid_t pid_ = -1;
  int fd_ = -1;
  FdStream stream_{-1, -1};
  std::optional<int> exit_status_;
};

enum class Backbone { Unet, Dit };
enum class Fusion { None, Cbs, CbsDit };

std::string to_string(Fusion f);

struct HelloAck {
  LatentGeometry geometry;
  std::string backbone_id;
};

class Client {
 public:
  explicit Client(const std::string& shell_command);

  HelloAck hello(Backbone backbone, Fusion fusion, int image_height, int image_width);
  std::string set_condition(const Conditioning& cond);
  LatentTensor predict_noise(const LatentTensor& z, int train_t, const std::string& cond_ref);
  LatentTensor encode(const ImagePlane& img);
  ImagePlane decode(const LatentTensor& z);
  void shutdown();
  int wait() { return process_.wait(); }

  // One raw request/response exchange. Throws TransportError on EOF or a
  // malformed response; protocol-level errors are returned as messages.
  Message exchange(const Message& request);

 private:
  Message checked(const Message& request, const std::string& expected_op);

  Process process_;
  bool greeted_ = false;
};

// Denoiser backed by a bridge process. Conditioning is registered once per
// distinct Conditioning object and referenced by id afterwards.
class BridgeDenoiser : public Denoiser {
 public:
  BridgeDenoiser(Client& client, LatentGeometry geometry)
      : client_(client), geometry_(geometry) {}

  LatentGeometry geometry() const override { return geometry_; }
  LatentTensor predict_noise(const LatentTensor& z, const StepInfo& step,
                             const Conditioning& cond) override;

 private:
  Client& client_;
  LatentGeometry geometry_;
  const Conditioning* bound_ = nullptr;
  std::string cond_ref_;
};

}  // namespace tryw::bridge
