import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the end-to-end test spawns the python control loop and watches it live
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
