import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    // the integration test drives a live throttled transfer (~0.1 MB/s)
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
