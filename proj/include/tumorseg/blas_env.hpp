// Copyright 2026 The tumorseg Authors
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

#pragma once

namespace tumorseg {

/// Name of the BLAS kernel family in use, e.g. "SkylakeX".
const char* blas_core_name();

/// OpenBLAS picks its kernels once, at load time, from the CPU model. On
/// virtual CPUs with a generic model string it falls back to the SSE3
/// "Prescott" kernels. When that happened on a CPU with AVX2 or AVX-512,
/// this sets OPENBLAS_CORETYPE and re-executes the current process.
/// A user-set OPENBLAS_CORETYPE is left alone. Returns only if no re-exec
/// took place.
void reexec_with_native_blas(int argc, char** argv);

}  // namespace tumorseg
