// Copyright 2026 The repprobe Authors
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

#include <cstddef>
#include <functional>
#include <optional>

namespace repprobe {

/// Thread count from an explicit flag, else REPPROBE_THREADS, else 1.
unsigned resolve_thread_count(std::optional<unsigned> requested);

/// Runs body(i) for i in [0, n) over a static partition of `threads` workers.
/// Results must be written to per-index slots; any reduction happens in the
/// caller in index order. The exception of the lowest failing index is
/// rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace repprobe
