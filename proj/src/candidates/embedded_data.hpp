#pragma once

namespace flowrank::candidates::embedded {

extern const char* const kStdlibIndexJson;
extern const char* const kTypeIndexJson;

}  // namespace flowrank::candidates::embedded
