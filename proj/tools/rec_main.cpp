#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <stop_token>
#include <thread>

#include "rec/cli.hpp"

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

extern "C" void on_sigint(int) { g_interrupted = 1; }

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);

    std::stop_source stop;
    std::signal(SIGINT, on_sigint);
    // Signal handlers may only set a flag; this thread turns it into a stop request.
    std::jthread watcher([&stop](std::stop_token self) {
        while (!self.stop_requested()) {
            if (g_interrupted) {
                stop.request_stop();
                std::signal(SIGINT, SIG_DFL);  // a second Ctrl-C kills the process
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    });

    return rec::run_cli(args, std::cout, std::cerr, stop.get_token());
}
