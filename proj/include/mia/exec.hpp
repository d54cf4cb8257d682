#pragma once

namespace mia {

// Every parallel kernel in the library has a serial twin that computes the
// same bytes. Parallel is the production default; Serial is the reference
// the tests compare against. Results are required to be bit-identical, so
// parallel loops only ever write to per-iteration slots and reductions use
// a total order.
enum class Exec { Serial, Parallel };

}  // namespace mia
