fn main() {
    std::process::exit(gaussdkw::cli::parse_and_dispatch(std::env::args_os()));
}
