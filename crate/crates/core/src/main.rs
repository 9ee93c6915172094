fn main() {
    std::process::exit(orient_denoise::cli::main_with_args(std::env::args_os()));
}
