#pragma once

#include <stdexcept>
#include <string>

namespace qcmesh {

enum class Status : int {
  ok = 0,
  io = 1,
  validation = 2,
  hypothesis = 3,
  solver = 4,
  internal = 5,
};

class Error : public std::runtime_error {
public:
  Error(Status code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Status code() const { return code_; }

private:
  Status code_;
};

[[noreturn]] inline void fail(Status code, const std::string& what) { throw Error(code, what); }

}  // namespace qcmesh
