fn main() {
    std::process::exit(loop_accel::cli::main());
}
