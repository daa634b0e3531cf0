fn main() {
    std::process::exit(residual::cli::run(std::env::args_os()) as i32);
}
