fn main() {
    env_logger::init();
    std::process::exit(ogtt::cli::run(std::env::args()));
}
