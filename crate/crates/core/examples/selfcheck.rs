//! Runs the built-in verification battery from library code.

fn main() {
    let battery = patchseg::selfcheck::run();
    print!("{}", battery.table());
    std::process::exit(if battery.all_passed() { 0 } else { 1 });
}
