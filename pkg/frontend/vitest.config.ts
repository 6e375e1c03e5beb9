import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the integration suite trains a small model once and talks to a live
    // service process, so files must not race each other on one core
    fileParallelism: false,
    testTimeout: 60_000,
    hookTimeout: 180_000,
    globalSetup: "./tests/global-setup.ts",
  },
});
