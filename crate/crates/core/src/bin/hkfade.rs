fn main() {
    std::process::exit(hkfade::cli::main_with_args(std::env::args_os()));
}
