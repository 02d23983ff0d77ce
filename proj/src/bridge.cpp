#include "tryw/bridge.hpp"

#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "tryw/error.hpp"

namespace tryw::bridge {

namespace {

nlohmann::json dims_of(const LatentTensor& t) {
  return nlohmann::json::array({t.channels, t.height, t.width});
}

LatentTensor latent_from(const Message& msg) {
  const auto& dims = msg.header.at("dims");
  LatentTensor t;
  t.channels = dims.at(0).get<int>();
  t.height = dims.at(1).get<int>();
  t.width = dims.at(2).get<int>();
  t.data = msg.payload;
  return t;
}

}  // namespace

bool FdStream::fill() {
  char tmp[1 << 16];
  while (true) {
    const ssize_t n = ::read(read_fd_, tmp, sizeof(tmp));
    if (n > 0) {
      if (head_ > 0) {
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
        head_ = 0;
      }
      buf_.insert(buf_.end(), tmp, tmp + n);
      return true;
    }
    if (n == 0) return false;
    if (errno != EINTR) return false;
  }
}

std::optional<std::string> FdStream::read_line() {
  while (true) {
    for (std::size_t i = head_; i < buf_.size(); ++i) {
      if (buf_[i] == '\n') {
        std::string line(buf_.begin() + static_cast<std::ptrdiff_t>(head_),
                         buf_.begin() + static_cast<std::ptrdiff_t>(i));
        head_ = i + 1;
        return line;
      }
    }
    if (!fill()) return std::nullopt;
  }
}

bool FdStream::read_exact(std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    if (head_ == buf_.size() && !fill()) return false;
    const std::size_t take = std::min(n - got, buf_.size() - head_);
    std::memcpy(out + got, buf_.data() + head_, take);
    head_ += take;
    got += take;
  }
  return true;
}

void FdStream::write_all(const void* data, std::size_t n) {
  const auto* p = static_cast<const char*>(data);
  while (n > 0) {
    ssize_t w = ::send(write_fd_, p, n, MSG_NOSIGNAL);
    if (w < 0 && errno == ENOTSOCK) w = ::write(write_fd_, p, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("bridge write failed: ") + std::strerror(errno));
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

std::optional<std::size_t> element_count(const nlohmann::json& dims) {
  if (!dims.is_array() || dims.empty()) return std::nullopt;
  std::size_t n = 1;
  for (const auto& d : dims) {
    if (!d.is_number_integer() || d.get<long long>() < 0) return std::nullopt;
    n *= d.get<std::size_t>();
  }
  return n;
}

ReadResult read_message(FdStream& stream) {
  ReadResult res;
  const auto line = stream.read_line();
  if (!line) return res;
  try {
    res.message.header = nlohmann::json::parse(*line);
  } catch (const nlohmann::json::parse_error& e) {
    res.status = ReadStatus::BadHeader;
    res.error = e.what();
    return res;
  }
  auto& h = res.message.header;
  if (!h.is_object() || !h.contains("op") || !h["op"].is_string()) {
    res.status = ReadStatus::BadHeader;
    res.error = "header must be an object with a string \"op\"";
    return res;
  }
  std::size_t bytes = 0;
  if (h.contains("byte_length")) {
    if (!h["byte_length"].is_number_integer() || h["byte_length"].get<long long>() < 0) {
      res.status = ReadStatus::BadHeader;
      res.error = "byte_length must be a non-negative integer";
      return res;
    }
    bytes = h["byte_length"].get<std::size_t>();
  }
  std::vector<std::uint8_t> raw(bytes);
  if (bytes > 0 && !stream.read_exact(raw.data(), bytes)) {
    res.status = ReadStatus::Eof;
    return res;
  }
  if (bytes % 4 != 0) {
    res.status = ReadStatus::BadPayload;
    res.error = "byte_length is not a multiple of 4";
    return res;
  }
  if (h.contains("dims")) {
    const auto n = element_count(h["dims"]);
    if (!n || 4 * *n != bytes) {
      res.status = ReadStatus::BadPayload;
      res.error = "byte_length does not equal 4 * prod(dims)";
      return res;
    }
  }
  res.message.payload = read_f32_le(raw.data(), bytes / 4);
  res.status = ReadStatus::Ok;
  return res;
}

void write_message(FdStream& stream, const Message& msg) {
  nlohmann::json header = msg.header;
  header["byte_length"] = 4 * msg.payload.size();
  std::string line = header.dump();
  line.push_back('\n');
  std::vector<std::uint8_t> out(line.begin(), line.end());
  append_f32_le(out, msg.payload);
  stream.write_all(out.data(), out.size());
}

Message error_message(const std::string& code, const std::string& text) {
  Message m;
  m.header = {{"op", "error"}, {"code", code}, {"message", text}};
  return m;
}

std::vector<float> image_to_chw(const ImagePlane& img) {
  std::vector<float> out(img.data.size());
  const std::size_t hw = img.pixel_count();
  for (std::size_t i = 0; i < hw; ++i) {
    for (int c = 0; c < img.channels; ++c) {
      out[static_cast<std::size_t>(c) * hw + i] = img.data[i * img.channels + c];
    }
  }
  return out;
}

ImagePlane image_from_chw(const std::vector<float>& data, int channels, int height, int width) {
  ImagePlane img(width, height, channels);
  const std::size_t hw = img.pixel_count();
  if (data.size() != hw * channels) throw DimensionError("image_from_chw: size mismatch");
  for (std::size_t i = 0; i < hw; ++i) {
    for (int c = 0; c < channels; ++c) {
      img.data[i * channels + c] = std::clamp(data[static_cast<std::size_t>(c) * hw + i], 0.0f,
                                              1.0f);
    }
  }
  return img;
}

Process::Process(const std::string& shell_command) {
  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
    throw TransportError(std::string("socketpair failed: ") + std::strerror(errno));
  }
  pid_ = ::fork();
  if (pid_ < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw TransportError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid_ == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", shell_command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(sv[1]);
  fd_ = sv[0];
  stream_ = FdStream(fd_, fd_);
}

Process::~Process() {
  if (!exit_status_) {
    try {
      wait(2.0);
    } catch (...) {
    }
  }
}

int Process::wait(double timeout_seconds) {
  if (exit_status_) return *exit_status_;
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_WR);
  }
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
  int status = 0;
  while (true) {
    const pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) break;
    if (r < 0 && errno != EINTR) {
      status = -1;
      break;
    }
    if (std::chrono::steady_clock::now() > deadline) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return *exit_status_;
}

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::None: return "none";
    case Fusion::Cbs: return "cbs";
    case Fusion::CbsDit: return "cbs-dit";
  }
  return "none";
}

Client::Client(const std::string& shell_command) : process_(shell_command) {}

Message Client::exchange(const Message& request) {
  write_message(process_.stream(), request);
  auto res = read_message(process_.stream());
  if (res.status == ReadStatus::Eof) {
    throw TransportError("bridge closed the channel during '" +
                         request.header.value("op", std::string("?")) + "'");
  }
  if (res.status != ReadStatus::Ok) throw TransportError("malformed bridge response: " + res.error);
  return std::move(res.message);
}

Message Client::checked(const Message& request, const std::string& expected_op) {
  Message resp = exchange(request);
  const std::string op = resp.header.value("op", std::string());
  if (op == "error") {
    throw TransportError("bridge error [" + resp.header.value("code", std::string("?")) +
                         "]: " + resp.header.value("message", std::string()));
  }
  if (op != expected_op) {
    throw TransportError("unexpected bridge response '" + op + "' (wanted '" + expected_op +
                         "')");
  }
  return resp;
}

HelloAck Client::hello(Backbone backbone, Fusion fusion, int image_height, int image_width) {
  Message req;
  req.header = {{"op", "hello"},
                {"protocol", kProtocolVersion},
                {"backbone", backbone == Backbone::Unet ? "unet" : "dit"},
                {"fusion", to_string(fusion)},
                {"image_dims", {image_height, image_width}}};
  Message resp;
  try {
    resp = checked(req, "hello-ack");
  } catch (const TransportError& e) {
    throw TransportError(std::string("bridge handshake failed: ") + e.what());
  }
  if (resp.header.value("protocol", std::string()) != kProtocolVersion) {
    throw TransportError("bridge handshake failed: protocol version mismatch");
  }
  const auto& g = resp.header.at("latent_geometry");
  HelloAck ack;
  ack.geometry = {g.at(0).get<int>(), g.at(1).get<int>(), g.at(2).get<int>()};
  ack.backbone_id = resp.header.value("backbone_id", std::string());
  greeted_ = true;
  return ack;
}

std::string Client::set_condition(const Conditioning& cond) {
  const int w = cond.infused.width, h = cond.infused.height;
  const std::size_t hw = static_cast<std::size_t>(w) * h;
  Message req;
  req.header = {{"op", "condition"}, {"dims", {8, h, w}}, {"prompt", cond.prompt}};
  req.payload.assign(8 * hw, 0.0f);
  auto put_image = [&](const ImagePlane& img, std::size_t channel0) {
    if (img.data.empty()) return;
    if (!img.same_dims(w, h)) throw DimensionError("condition images must share dimensions");
    const auto chw = image_to_chw(img);
    for (int c = 0; c < 3; ++c) {
      const int src_c = img.channels == 3 ? c : 0;
      std::copy_n(chw.begin() + static_cast<std::ptrdiff_t>(src_c * hw), hw,
                  req.payload.begin() + static_cast<std::ptrdiff_t>((channel0 + c) * hw));
    }
  };
  auto put_mask = [&](const MaskPlane& m, std::size_t channel) {
    if (m.data.empty()) return;
    if (!m.same_dims(w, h)) throw DimensionError("condition masks must share dimensions");
    for (std::size_t i = 0; i < hw; ++i) req.payload[channel * hw + i] = m.data[i];
  };
  put_image(cond.infused, 0);
  put_mask(cond.agnostic, 3);
  put_image(cond.garment, 4);
  put_mask(cond.garment_mask, 7);
  const Message resp = checked(req, "condition-ack");
  return resp.header.at("cond-ref").get<std::string>();
}

LatentTensor Client::predict_noise(const LatentTensor& z, int train_t,
                                   const std::string& cond_ref) {
  Message req;
  req.header = {{"op", "predict_noise"}, {"t", train_t}, {"dims", dims_of(z)},
                {"cond-ref", cond_ref}};
  req.payload = z.data;
  const Message resp = checked(req, "predict_noise");
  LatentTensor out = latent_from(resp);
  if (!out.same_shape(z)) throw TransportError("bridge predict_noise changed the latent shape");
  return out;
}

LatentTensor Client::encode(const ImagePlane& img) {
  const ImagePlane rgb = img.channels == 3 ? img : ImagePlane();
  if (rgb.data.empty()) throw DimensionError("bridge encode expects an RGB image");
  Message req;
  req.header = {{"op", "encode"}, {"dims", {3, img.height, img.width}}};
  req.payload = image_to_chw(img);
  return latent_from(checked(req, "encode"));
}

ImagePlane Client::decode(const LatentTensor& z) {
  Message req;
  req.header = {{"op", "decode"}, {"dims", dims_of(z)}};
  req.payload = z.data;
  const Message resp = checked(req, "decode");
  const auto& d = resp.header.at("dims");
  return image_from_chw(resp.payload, d.at(0).get<int>(), d.at(1).get<int>(),
                        d.at(2).get<int>());
}

void Client::shutdown() {
  Message req;
  req.header = {{"op", "shutdown"}};
  checked(req, "shutdown-ack");
}

LatentTensor BridgeDenoiser::predict_noise(const LatentTensor& z, const StepInfo& step,
                                           const Conditioning& cond) {
  if (bound_ != &cond) {
    cond_ref_ = client_.set_condition(cond);
    bound_ = &cond;
  }
  return client_.predict_noise(z, step.train_t, cond_ref_);
}

}  // namespace tryw::bridge
