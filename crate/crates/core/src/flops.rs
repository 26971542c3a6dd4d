//! Thread-local multiplication tally.
//!
//! Every kernel that performs real multiplications (or divisions) reports them
//! here. A complex multiply is booked as four real multiplications. Dense
//! library kernels book their textbook counts: `n³` for an `n×n` inverse and
//! `m·k·n` for an `(m×k)·(k×n)` product.

use std::cell::Cell;

thread_local! {
    static TALLY: Cell<u64> = const { Cell::new(0) };
}

#[inline]
pub fn add(n: u64) {
    TALLY.with(|t| t.set(t.get().wrapping_add(n)));
}

#[inline]
pub fn add_complex(n: u64) {
    add(4 * n);
}

pub fn current() -> u64 {
    TALLY.with(Cell::get)
}

/// Runs `f` and returns its result with the number of multiplications booked
/// while it ran. Nested calls are fine; the outer scope still sees the inner
/// tally.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = current();
    let out = f();
    (out, current().wrapping_sub(start))
}
