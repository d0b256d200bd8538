#include "mmreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mmreg {

int workerCount()
{
    if (const char* env = std::getenv("MMREG_THREADS"))
    {
        try
        {
            const int n = std::stoi(env);
            if (n > 0)
                return n;
        }
        catch (const std::exception&)
        {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallelRows(int rows, const std::function<void(int)>& body, int workers)
{
    workers = std::clamp(workers, 1, std::max(1, rows));
    if (workers == 1)
    {
        for (int r = 0; r < rows; ++r)
            body(r);
        return;
    }

    constexpr int kBlock = 8;
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failureMutex;
    auto worker = [&] {
        for (;;)
        {
            const int start = next.fetch_add(kBlock);
            if (start >= rows)
                return;
            const int stop = std::min(rows, start + kBlock);
            try
            {
                for (int r = start; r < stop; ++r)
                    body(r);
            }
            catch (...)
            {
                std::lock_guard lock(failureMutex);
                if (!failure)
                    failure = std::current_exception();
                next.store(rows);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int i = 1; i < workers; ++i)
        pool.emplace_back(worker);
    worker();
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace mmreg
