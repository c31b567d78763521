fn main() {
    std::process::exit(livewire::cli::run(std::env::args_os()));
}
