import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 300_000,
    // tfjs keeps a single cpu backend; model/training tests must not share it
    // across worker threads
    pool: "forks",
    maxConcurrency: 1,
    fileParallelism: false,
  },
});
