fn main() {
    std::process::exit(svr::cli::run());
}
