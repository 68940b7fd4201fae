import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    // the contract suite boots a real backend process
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
