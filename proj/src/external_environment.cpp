// Copyright 2026 The AQA Desk Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <arpa/inet.h>
#include <netdb.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include "aqa/environment.hpp"
#include "aqa/error.hpp"

namespace aqa {

// Bidirectional line-oriented byte channel over a pair of file descriptors.
class LineChannel {
 public:
  LineChannel(int read_fd, int write_fd, pid_t child) : read_fd_(read_fd), write_fd_(write_fd), child_(child) {}
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  ~LineChannel() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (child_ > 0) {
      int status = 0;
      ::waitpid(child_, &status, 0);
    }
  }

  bool write_line(const std::string& line) {
    std::string data = line + '\n';
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
      const ssize_t n = ::write(write_fd_, p, left);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    return true;
  }

  bool read_line(std::string& line) {
    line.clear();
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return true;
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::mutex& mutex() { return mutex_; }

 private:
  int read_fd_;
  int write_fd_;
  pid_t child_;
  std::string buffer_;
  std::mutex mutex_;
};

ExternalEnvironment::ExternalEnvironment(std::unique_ptr<LineChannel> channel)
    : channel_(std::move(channel)) {}

ExternalEnvironment::~ExternalEnvironment() = default;

std::unique_ptr<ExternalEnvironment> ExternalEnvironment::spawn(const std::vector<std::string>& argv) {
  if (argv.empty()) throw PreconditionError("spawn: empty command");
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  if (::pipe(from_child) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    std::vector<char*> args;
    for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::unique_ptr<ExternalEnvironment>(
      new ExternalEnvironment(std::make_unique<LineChannel>(from_child[0], to_child[1], pid)));
}

std::unique_ptr<ExternalEnvironment> ExternalEnvironment::connect(const std::string& host,
                                                                  std::uint16_t port) {
  ::signal(SIGPIPE, SIG_IGN);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw Error("resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error("cannot connect to " + host + ":" + service);
  return std::unique_ptr<ExternalEnvironment>(
      new ExternalEnvironment(std::make_unique<LineChannel>(fd, fd, -1)));
}

AnswerCandidate ExternalEnvironment::answer(const Tokens& question, const Tokens&,
                                            std::string_view qid) const {
  AnswerCandidate failed;
  failed.failed = true;
  std::lock_guard lock(channel_->mutex());
  const std::string id(qid);
  if (!channel_->write_line(encode_request({id, join(question)}))) return failed;
  std::string line;
  if (!channel_->read_line(line)) return failed;
  try {
    const WireResponse r = decode_response(line);
    if (r.qid != id) return failed;
    AnswerCandidate out;
    out.answer = tokenize(r.answer);
    out.score = r.score;
    return out;
  } catch (const ParseError&) {
    return failed;
  }
}

}  // namespace aqa
