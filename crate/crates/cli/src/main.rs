fn main() {
    env_logger::Builder::new().filter_level(log::LevelFilter::Warn).init();
    std::process::exit(rffdeq_cli::run(std::env::args_os()));
}
