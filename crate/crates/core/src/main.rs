fn main() {
    std::process::exit(moodflow::cli::run(std::env::args_os()));
}
