#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace nvid {

// Runs body(i) for i in [0, n) on up to `jobs` threads. Work is split into
// contiguous index blocks, so results written by index are deterministic.
// The first exception thrown by any block is rethrown after all threads join.
template <typename Body>
void parallel_for(std::size_t n, int jobs, Body&& body)
{
	const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1), std::max<std::size_t>(n, 1));
	if (workers <= 1) {
		for (std::size_t i = 0; i < n; ++i)
			body(i);
		return;
	}
	std::vector<std::exception_ptr> errors(workers);
	std::vector<std::thread> threads;
	threads.reserve(workers);
	for (std::size_t w = 0; w < workers; ++w) {
		threads.emplace_back([&, w] {
			const std::size_t begin = n * w / workers;
			const std::size_t end = n * (w + 1) / workers;
			try {
				for (std::size_t i = begin; i < end; ++i)
					body(i);
			} catch (...) {
				errors[w] = std::current_exception();
			}
		});
	}
	for (auto& t : threads)
		t.join();
	for (auto& e : errors)
		if (e)
			std::rethrow_exception(e);
}

} // namespace nvid
