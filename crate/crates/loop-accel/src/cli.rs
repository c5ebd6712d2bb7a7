//! Command-line driver (placeholder during bring-up).
pub fn main() -> i32 {
    0
}
